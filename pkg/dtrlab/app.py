"""FastAPI application exposing the read-only laboratory operations.

Serves surrogate checks, psi-transform consistency reports and oracle Monte Carlo
values. No state is kept besides the surrogate registry built at startup.
"""

import logging
import os
import sys
from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from dtrlab import __version__
from dtrlab.consistency import CHECK_GRID, consistency_report
from dtrlab.models.results import CheckReport, ConsistencyReport, TauVector
from dtrlab.models.specs import SurrogateSpec
from dtrlab.simlab import mc_value, oracle_rule
from dtrlab.surrogate import SURROGATES, check_condition_two, check_type_bounds

logging.basicConfig(
    level=getattr(logging, os.getenv("DTRLAB_LOG_LEVEL", "INFO").upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler(sys.stdout)
    ]
)

logger = logging.getLogger(__name__)

MAX_EVAL = 1_000_000

# Global state: built during lifespan startup, read by the endpoints
surrogates: Optional[dict[str, SurrogateSpec]] = None


@asynccontextmanager
async def lifespan(app: FastAPI):
    global surrogates

    logger.info("Application startup initiated")
    surrogates = dict(SURROGATES)
    logger.info(f"Surrogate registry ready: {sorted(surrogates)}")

    yield

    surrogates = None
    logger.info("Application shutdown complete")


app = FastAPI(title="dtrlab", version=__version__, lifespan=lifespan)


# Request/Response Models
class ConsistencyRequest(BaseModel):
    surrogate: str
    tau: tuple[float, float, float, float]
    box: float = Field(default=50.0, gt=0)
    grid_step: float = Field(default=0.5, gt=0)


class SurrogateCheckResponse(BaseModel):
    surrogate: str
    condition_two: CheckReport
    type_bounds: CheckReport


class OracleValueRequest(BaseModel):
    setting: int = Field(ge=1, le=5)
    n_eval: int = Field(default=10000, ge=2, le=MAX_EVAL)
    seed: int = 0


class OracleValueResponse(BaseModel):
    setting: int
    value: float
    sd: float
    method: str
    n: int
    offset: float


def _surrogate(key: str) -> SurrogateSpec:
    if surrogates is None:
        raise HTTPException(status_code=500, detail="Surrogate registry not initialized")
    try:
        return surrogates[key]
    except KeyError:
        raise HTTPException(status_code=404, detail=f"Unknown surrogate {key!r}") from None


# Endpoints
@app.get("/health")
async def health():
    logger.debug("Health check requested")
    return {"status": "healthy", "version": __version__, "registry_initialized": surrogates is not None}


@app.post("/consistency", response_model=ConsistencyReport)
async def consistency(request: ConsistencyRequest):
    """Maximizer of the psi transform at tau, the tau-optimal rule and the verdict.

    Raises:
        HTTPException: 404 for an unknown surrogate, 422 for a non-positive tau
    """
    s = _surrogate(request.surrogate)
    try:
        return consistency_report(s, TauVector(tau=request.tau), request.box, request.grid_step)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"Error in consistency endpoint: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))


@app.get("/surrogates/{key}/check", response_model=SurrogateCheckResponse)
async def surrogate_check(key: str):
    s = _surrogate(key)
    return SurrogateCheckResponse(
        surrogate=key,
        condition_two=check_condition_two(s, CHECK_GRID),
        type_bounds=check_type_bounds(s, CHECK_GRID),
    )


@app.post("/oracle/value", response_model=OracleValueResponse)
async def oracle_value(request: OracleValueRequest):
    """Monte Carlo value of a setting's optimal regime on the raw reward scale."""
    try:
        estimate = mc_value(request.setting, oracle_rule(request.setting), request.n_eval, request.seed)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"Error in oracle value endpoint: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))
    return OracleValueResponse(setting=request.setting, **estimate.to_report())


if __name__ == "__main__":
    import uvicorn
    logger.info("Starting dtrlab server")
    uvicorn.run(
        app,
        host="0.0.0.0",
        port=int(os.getenv("DTRLAB_PORT", "8011")),
        log_level=os.getenv("DTRLAB_LOG_LEVEL", "info").lower()
    )
