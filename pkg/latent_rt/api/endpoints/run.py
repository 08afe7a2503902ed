import asyncio
import logging
from typing import List, Literal

from fastapi import APIRouter, Depends, HTTPException, status

from latent_rt.core.errors import LatentRTError
from latent_rt.core.security import verify_token
from latent_rt.schemas.models import (
    FitRequest,
    FitResultModel,
    LoglikRequest,
    LoglikResponse,
    OracleReportModel,
)
from latent_rt.services.oracle import run_checks
from latent_rt.services.runner import WorkflowRunner

logger = logging.getLogger(__name__)

# Create an API router
router = APIRouter()


def _unprocessable(e: LatentRTError) -> HTTPException:
    logger.warning("Request rejected: %s", e)
    return HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=f"{type(e).__name__}: {e}")


@router.post("/loglik", response_model=LoglikResponse)
async def loglik(request: LoglikRequest, _token=Depends(verify_token)):
    """
    Log-likelihood of the posted CSV dataset at the config's params section.
    The computation runs in a worker thread so the event loop stays free.
    """
    runner = WorkflowRunner(request.config)
    try:
        dataset = runner.load(text=request.data_csv)
        return await asyncio.to_thread(runner.loglik, dataset)
    except LatentRTError as e:
        raise _unprocessable(e) from e


@router.post("/fit", response_model=FitResultModel)
async def fit(request: FitRequest, _token=Depends(verify_token)):
    """
    Maximum-likelihood fit of the posted dataset. A non-converged fit is still
    a 200 response; check the converged field.
    """
    runner = WorkflowRunner(request.config)
    try:
        dataset = runner.load(text=request.data_csv)
        init = request.init.to_parameters() if request.init else None
        result = await asyncio.to_thread(runner.fit, dataset, init)
    except LatentRTError as e:
        raise _unprocessable(e) from e
    return result.to_dict()


@router.get("/check", response_model=List[OracleReportModel])
async def check(level: Literal["quick", "full"] = "quick", _token=Depends(verify_token)):
    """Runs the oracle suite; the full level takes minutes."""
    reports = await asyncio.to_thread(run_checks, level)
    return [r.to_dict() for r in reports]
