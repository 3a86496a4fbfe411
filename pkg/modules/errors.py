"""
Hiérarchie d'exceptions du laboratoire Schwartzman
Chaque erreur porte le code de sortie utilisé par le lanceur d'expériences
"""
from typing import Any, Dict, Optional


class LabError(Exception):
    """Erreur de base du laboratoire"""
    exit_code = 3

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        payload = {'error': type(self).__name__, 'message': self.message}
        payload.update({k: v for k, v in self.details.items() if _is_plain(v)})
        return payload


class StructuralError(LabError):
    """Rangs incompatibles entre classes d'homologie"""


class DomainError(LabError):
    """Entrée hors du domaine de l'opération (vide, direction nulle, fenêtre invalide...)"""


class ConstructionError(LabError):
    """Construction impossible (calendrier irréalisable, recouvrement raté, classes incohérentes)"""

    def __init__(self, message: str, epoch: Optional[int] = None, **details: Any):
        super().__init__(message, epoch=epoch, **details)
        self.epoch = epoch


class NumericalCoverError(LabError):
    """Dénominateur de partition de l'unité trop petit"""


class ConsistencyError(LabError):
    """Classe de lacet non entière au-delà de la tolérance"""


class TransversalityError(LabError):
    """Croisement quasi tangent avec une hypersurface"""

    def __init__(self, message: str, window=None, crossing_time: Optional[float] = None,
                 normal_speed: Optional[float] = None):
        super().__init__(message, window=window, crossing_time=crossing_time,
                         normal_speed=normal_speed)
        self.window = window
        self.crossing_time = crossing_time
        self.normal_speed = normal_speed


class IntegrationError(LabError):
    """Échec de l'intégrateur (pas trop petit); conserve la trajectoire partielle"""

    def __init__(self, message: str, times=None, states=None):
        super().__init__(message)
        self.times = times
        self.states = states


class ResolutionError(LabError):
    """Grille trop grossière pour le calcul de plus court chemin"""


class ConfigValidationError(LabError):
    """Configuration d'expérience invalide"""
    exit_code = 2

    def __init__(self, message: str, field_path: str = '$'):
        super().__init__(message, field_path=field_path)
        self.field_path = field_path


def _is_plain(value: Any) -> bool:
    if value is None or isinstance(value, (str, int, float, bool)):
        return True
    if isinstance(value, (list, tuple)):
        return all(_is_plain(v) for v in value)
    return False
