from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class DDCSieveConfig(AppConfig):
    name = "ddcsieve"
    verbose_name = _("Dynamic Discrete Choice Sieve")
