"""
Runtime configuration for rabitherm
"""
import os


def _env(key, default):
    return os.environ.get(f'RABITHERM_{key}', default)


class Config:
    """Base configuration"""
    # Adiabatic truncation and rank classification
    THETA = int(_env('THETA', 5))
    RANK_TOL = float(_env('RANK_TOL', 1e-12))

    # Temperature grid, log10(T / omega_f)
    T_MIN_LOG10 = float(_env('T_MIN_LOG10', -3.0))
    T_MAX_LOG10 = float(_env('T_MAX_LOG10', 0.5))
    T_POINTS = int(_env('T_POINTS', 400))

    # Precision
    PRECISION = _env('PRECISION', 'standard')
    EXTENDED_DPS = int(_env('EXTENDED_DPS', 50))
    EXTENDED_T_THRESHOLD = float(_env('EXTENDED_T_THRESHOLD', 3e-3))
    LAGUERRE_EXTENDED_ARG = float(_env('LAGUERRE_EXTENDED_ARG', 60.0))
    COSH_GUARD = float(_env('COSH_GUARD', 700.0))

    # Exact oracle cutoff growth
    NMAX_FLOOR = int(_env('NMAX_FLOOR', 25))
    NMAX_STEP = int(_env('NMAX_STEP', 5))
    NMAX_CEILING = int(_env('NMAX_CEILING', 400))
    NMAX_TOL = float(_env('NMAX_TOL', 1e-8))

    # Ensembles
    CALIBRATION_DRAWS = int(_env('CALIBRATION_DRAWS', 2000))
    HEATMAP_T_BINS = int(_env('HEATMAP_T_BINS', 300))
    HEATMAP_F_BINS = int(_env('HEATMAP_F_BINS', 200))
    HEATMAP_F_LOG10_RANGE = (-2.0, 8.0)
    THREADS = int(_env('THREADS', 1))

    # Logging
    LOG_LEVEL = _env('LOG_LEVEL', 'INFO')
    LOG_FILE = _env('LOG_FILE', 'logs/rabitherm.log')

    @classmethod
    def as_dict(cls):
        return {key: getattr(cls, key) for key in dir(cls) if key.isupper()}


class DevelopmentConfig(Config):
    """Development configuration"""
    DEBUG = True
    LOG_LEVEL = _env('LOG_LEVEL', 'DEBUG')


class TestingConfig(Config):
    """Testing configuration"""
    TESTING = True
    LOG_LEVEL = 'WARNING'


class ProductionConfig(Config):
    """Production configuration"""
    DEBUG = False
    LOG_LEVEL = _env('LOG_LEVEL', 'INFO')
    LOG_FILE = _env('LOG_FILE', 'logs/rabitherm.log')


config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': DevelopmentConfig
}
