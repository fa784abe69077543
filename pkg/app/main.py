from fastapi import FastAPI, UploadFile, File, HTTPException
from fastapi.middleware.cors import CORSMiddleware
import json
import logging
import time
from dotenv import load_dotenv

from app.agents.orchestrator import ForgeOrchestrator
from app.config import load_settings
from app.models.errors import ForgeError, InputError
from app.models.schemas import (
    AssignmentReport,
    AssignmentRequest,
    GraphFile,
    GraphValidationReport,
    MZVReport,
    MZVRequest,
    PeriodReport,
    PeriodsRequest,
)

load_dotenv()

logger = logging.getLogger(__name__)

app = FastAPI(title="Schottky Forge API",
              description="Schottky uniformization, period matrices and KZ residue data for stable graphs",
              version="1.0.0")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

orchestrator = ForgeOrchestrator(load_settings())


def _http_error(e: Exception) -> HTTPException:
    if isinstance(e, InputError):
        return HTTPException(status_code=400, detail=str(e))
    if isinstance(e, ForgeError):
        return HTTPException(status_code=422, detail=f"{type(e).__name__}: {e}")
    logger.exception("unexpected failure")
    return HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")


@app.get("/")
async def root():
    return {"message": "Schottky Forge API is running", "status": "healthy"}


@app.get("/health")
async def health():
    return {"status": "healthy", "timestamp": time.time()}


@app.post("/validate", response_model=GraphValidationReport)
async def validate(graph: GraphFile):
    try:
        return orchestrator.validate(graph)
    except Exception as e:
        raise _http_error(e)


@app.post("/validate/upload", response_model=GraphValidationReport)
async def validate_upload(file: UploadFile = File(...)):
    """
    Validate a graph JSON file upload
    """
    if not file.filename.lower().endswith(".json"):
        raise HTTPException(status_code=400, detail=f"Only JSON files allowed. Invalid file: {file.filename}")
    raw = await file.read()
    try:
        data = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise HTTPException(status_code=400, detail=f"parse error: {e}")
    try:
        return orchestrator.validate(data)
    except Exception as e:
        raise _http_error(e)


@app.post("/periods", response_model=PeriodReport)
async def periods(request: PeriodsRequest):
    start_time = time.time()
    try:
        report = orchestrator.periods(request.graph, request.params, request.ring, request.wordlen, request.degree)
    except Exception as e:
        raise _http_error(e)
    logger.info(f"periods computed in {time.time() - start_time:.2f}s")
    return report


@app.post("/kz/mzv", response_model=MZVReport)
async def kz_mzv(request: MZVRequest):
    try:
        return orchestrator.kz_mzv(request.indices)
    except Exception as e:
        raise _http_error(e)


@app.post("/kz/assignment", response_model=AssignmentReport)
async def kz_assignment(request: AssignmentRequest):
    try:
        return orchestrator.kz_assignment(request.graph, request.weight, request.eliminated_tail)
    except Exception as e:
        raise _http_error(e)


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
