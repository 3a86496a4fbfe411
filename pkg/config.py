"""
Configuration du laboratoire Schwartzman
"""
import os
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = os.path.dirname(os.path.abspath(__file__))


class Config:
    """Configuration principale"""

    # Sorties
    OUTPUT_DIR = os.getenv('LAB_OUTPUT_DIR', os.path.join(BASE_DIR, 'out'))
    GOLDEN_DIR = os.getenv('LAB_GOLDEN_DIR', os.path.join(BASE_DIR, 'configs', 'golden'))
    SCHEMA_VERSION = 1

    # Exécution
    THREADS = int(os.getenv('LAB_THREADS', 1))
    LOG_LEVEL = os.getenv('LAB_LOG_LEVEL', 'INFO')

    # Tolérances numériques
    CONVERGENCE_TOL = float(os.getenv('LAB_CONVERGENCE_TOL', 1e-3))
    TRANSVERSALITY_TOL = float(os.getenv('LAB_TRANSVERSALITY_TOL', 1e-8))
    LOOP_CLOSURE_TOL = 1e-9
    INTEGRALITY_TOL = 1e-6
    DENOMINATOR_FLOOR = 1e-9

    # Échantillonnage des courbes (points par unité de déplacement du relevé)
    SAMPLES_PER_UNIT = int(os.getenv('LAB_SAMPLES_PER_UNIT', 16))

    # Solénoïdes
    ODOMETER_DEPTH = int(os.getenv('LAB_ODOMETER_DEPTH', 16))
    MEASURE_TEST_SETS = 64

    # Amas équilibrés: rapport d'échelle de la "décennie"
    BALANCE_SPAN = float(os.getenv('LAB_BALANCE_SPAN', 10.0))

    # Vérification du recouvrement des fonctions calibrantes (points par dimension)
    CALIBRATOR_COVER_GRID = int(os.getenv('LAB_CALIBRATOR_COVER_GRID', 64))


class DevelopmentConfig(Config):
    """Configuration développement"""
    DEBUG = True
    LOG_LEVEL = os.getenv('LAB_LOG_LEVEL', 'DEBUG')


class ProductionConfig(Config):
    """Configuration production"""
    DEBUG = False


# Sélection de la config selon l'environnement
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'default': ProductionConfig
}


def get_config():
    """Retourne la configuration appropriée"""
    env = os.getenv('LAB_ENV', 'production')
    return config.get(env, config['default'])
