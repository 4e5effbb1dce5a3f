import logging


class LoggerMixin(object):
    """Mixin for plain classes that provides a logger named after the class."""

    @property
    def logger(self):
        name = '.'.join([
            self.__module__,
            self.__class__.__name__
        ])
        return logging.getLogger(name)


class FormLoggerMixin(LoggerMixin):
    """Mixin for django forms that provide logging information for events like
    successfull/failed validation."""

    def is_valid(self) -> bool:
        if super().is_valid():
            self.logger.info("Form successfully cleaned.")
            self.logger.debug(f"Form cleaned data: {self.cleaned_data}")
            return True

        if self.errors:
            self.logger.warning(self.errors.as_data())
        else:
            self.logger.info("Form has errors (or is unbound).")
        return False


VERBOSITY_LEVELS = {0: logging.WARNING, 1: logging.INFO, 2: logging.DEBUG, 3: logging.DEBUG}


class CommandLoggerMixin(LoggerMixin):
    """Mixin for management commands that sets the level of the package logger from
    Django's ``--verbosity`` option before the command is executed."""

    def execute(self, *args, **options):
        level = VERBOSITY_LEVELS.get(options.get("verbosity", 1), logging.DEBUG)
        logging.getLogger("hilbertfc").setLevel(level)
        self.logger.debug(f"Executing with options {options}")
        return super().execute(*args, **options)
