from flask import Flask
from config import config
from commands import register_commands
from logging.handlers import RotatingFileHandler
import logging
import os


def create_app(config_name=None):
    app = Flask(__name__)

    if isinstance(config_name, type):
        app.config.from_object(config_name)
    else:
        config_name = config_name or os.environ.get('FLASK_CONFIG', 'default')
        app.config.from_object(config[config_name])

    # Register blueprints
    from tdisense.api import api
    from tdisense.errors import errors

    app.register_blueprint(api, url_prefix='/api')
    app.register_blueprint(errors)

    # Configure logging
    if not app.debug and not app.testing:
        level = getattr(logging, str(app.config['LOG_LEVEL']).upper(), logging.INFO)
        if app.config['LOG_TO_STDOUT']:
            handler = logging.StreamHandler()
        else:
            if not os.path.exists('logs'):
                os.mkdir('logs')
            handler = RotatingFileHandler('logs/tdisense.log', maxBytes=10240, backupCount=10)
        handler.setFormatter(logging.Formatter(
            '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'))
        handler.setLevel(level)
        # app.logger is the 'tdisense' logger; tdisense.* module loggers propagate to it
        app.logger.addHandler(handler)
        app.logger.setLevel(level)
        app.logger.info('tdi-sense startup')

    # Register CLI commands
    register_commands(app)
    return app
