#!/usr/bin/env python
"""Command line entry point of the pipeline.

All subcommands (``gen``, ``extract``, ``train_eval``, ``reho``, ``stats`` and
``gradcheck``) are Django management commands of the apps in `hilbertfc`.
"""
import os
import sys


def main():
    """Run a pipeline command."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'hilbertfc.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
