from django.apps import AppConfig


class SynthCohortConfig(AppConfig):
    name = 'hilbertfc.synthcohort'
    verbose_name = "Synthetic cohorts"
