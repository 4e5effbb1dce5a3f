from django.apps import AppConfig


class NetworkConfig(AppConfig):
    name = 'hilbertfc.network'
    verbose_name = "CNN engine"
