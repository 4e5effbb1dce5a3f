from django.apps import AppConfig


class FeaturesConfig(AppConfig):
    name = 'hilbertfc.features'
    verbose_name = "Hilbert curve ROI features"
