import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    # Logging
    LOG_TO_STDOUT = os.environ.get('LOG_TO_STDOUT')
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')

    # Experiment defaults, overridden by config files and CLI flags
    TDI_OUTPUT_DIR = os.environ.get('TDI_OUTPUT_DIR') or 'results'
    TDI_THREADS = int(os.environ.get('TDI_THREADS') or 1)
    TDI_SEED = int(os.environ.get('TDI_SEED') or 20240917)
    TDI_MODE = os.environ.get('TDI_MODE', 'mc').lower()
    TDI_QUADRATURE_NODES = int(os.environ.get('TDI_QUADRATURE_NODES') or 8)
    TDI_DILATION_SAMPLES = int(os.environ.get('TDI_DILATION_SAMPLES') or 16)

    # Multi-level environments
    TDI_DIMENSION_CAP = int(os.environ.get('TDI_DIMENSION_CAP') or 4096)
    TDI_FOCK_DIM = int(os.environ.get('TDI_FOCK_DIM') or 9)


class DevelopmentConfig(Config):
    DEBUG = True
    DEVELOPMENT = True


class ProductionConfig(Config):
    DEBUG = False
    DEVELOPMENT = False


class TestingConfig(Config):
    TESTING = True
    TDI_THREADS = 1
    TDI_OUTPUT_DIR = 'test-results'
    TDI_FOCK_DIM = 3


config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}
