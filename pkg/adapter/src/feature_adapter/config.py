from dataclasses import dataclass

RESNET_DIM = 2048
PLACES_DIM = 365
OBJECTS_DIM = 80
FACE_DIM = 10  # 8 expression probabilities + valence + arousal


@dataclass
class AdapterConfig:
    """Extraction settings; model names resolve through the registry."""
    sample_rate_hz: int = 1
    scene_model: str = "builtin"
    object_model: str = "builtin"
    face_model: str = "builtin"
    embed_model: str = "builtin"
    device: str = "cpu"

    def __post_init__(self):
        if self.sample_rate_hz < 1:
            raise ValueError("sample_rate_hz must be >= 1")
