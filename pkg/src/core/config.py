from pydantic_settings import BaseSettings
from typing import Literal

class Settings(BaseSettings):
    HBAR: float = 1.0
    DEFAULT_SEED: int = 0
    DEFAULT_GRID_POINTS: int = 2049

    RK4_BASE_STEPS: int = 64
    RK4_MAX_STEPS: int = 2**20
    RK4_CONVERGENCE_TOL: float = 1e-9

    UNITARY_TOL: float = 1e-10
    HERMITIAN_TOL: float = 1e-10
    PSD_TOL: float = 1e-8
    TRACE_TOL: float = 1e-8
    TIE_RTOL: float = 1e-10
    EIGEN_METHOD: Literal["lapack", "jacobi"] = "lapack"

    QUADRATURE_RTOL: float = 1e-6
    STRICT_QUADRATURE: bool = True
    MAX_TIE_CANDIDATES: int = 64
    TAU_SLACK: float = 1e-6

    P_GRID: str = "1,1.5,2,3,4,8,16,inf"
    BASIS_SAMPLES: int = 100
    HILLCLIMB_ITERS: int = 400
    HILLCLIMB_STEP: float = 0.3

    SCENARIO_PRESETS_PATH: str = "src/scenarios/presets.yaml"

    LOG_LEVEL: str = "INFO"
    OUTPUT_FORMAT: Literal["csv", "jsonl"] = "csv"
    SIGNIFICANT_DIGITS: int = 12

    class Config:
        env_file = ".env"
        extra = "ignore"

settings = Settings()
