from django.apps import AppConfig


class ExperimentsConfig(AppConfig):
    name = 'hilbertfc.experiments'
    verbose_name = "Repeated-split experiments"
