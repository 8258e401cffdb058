from dotenv import load_dotenv
from dataclasses import dataclass, field
from typing import Any, Dict, Optional
import os
import logging
from logging.handlers import RotatingFileHandler

__version__ = '0.3.0'


@dataclass
class App:
    """Resolved runtime: settings dict plus the package logger"""
    config_name: str
    settings: Dict[str, Any] = field(default_factory=dict)
    logger: Optional[logging.Logger] = None

    def get(self, key, default=None):
        return self.settings.get(key, default)


def create_app(config_name=None):
    # Load environment variables
    load_dotenv()

    # Import configuration
    from config import config
    config_name = config_name or os.environ.get('RABITHERM_ENV', 'development')
    if config_name not in config:
        from rabitherm.exceptions import ConfigError
        raise ConfigError(f"Unknown configuration '{config_name}'")

    app = App(config_name=config_name, settings=config[config_name].as_dict())
    app.logger = logging.getLogger('rabitherm')

    if config_name == 'production':
        configure_logging(app)
    else:
        configure_console_logging(app)

    app.logger.debug(f"rabitherm {__version__} runtime created ({config_name})")
    return app


def configure_logging(app):
    """Configure rotating file logging for production"""
    log_file = app.get('LOG_FILE', 'logs/rabitherm.log')
    log_dir = os.path.dirname(log_file)
    if log_dir and not os.path.exists(log_dir):
        os.makedirs(log_dir)

    file_handler = RotatingFileHandler(
        log_file,
        maxBytes=10240000,
        backupCount=10
    )

    file_handler.setFormatter(logging.Formatter(
        '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'
    ))

    level = getattr(logging, app.get('LOG_LEVEL', 'INFO'))
    file_handler.setLevel(level)
    app.logger.addHandler(file_handler)
    app.logger.setLevel(level)
    app.logger.info('rabitherm startup')


def configure_console_logging(app):
    """Stream handler on stderr for development and testing"""
    level = getattr(logging, app.get('LOG_LEVEL', 'INFO'))
    has_console = any(
        type(handler) is logging.StreamHandler for handler in app.logger.handlers
    )
    if not has_console:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
        app.logger.addHandler(handler)
    app.logger.setLevel(level)
