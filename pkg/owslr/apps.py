from django.apps import AppConfig


class OwslrConfig(AppConfig):
    name = 'owslr'
    verbose_name = 'Overlapping-windows super-resolution'
