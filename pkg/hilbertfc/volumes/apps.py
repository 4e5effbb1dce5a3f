from django.apps import AppConfig


class VolumesConfig(AppConfig):
    name = 'hilbertfc.volumes'
    verbose_name = "Volumes and preprocessing"
