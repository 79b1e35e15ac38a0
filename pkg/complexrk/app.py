from __future__ import annotations

import logging

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from .api import router as experiments_router
from .storage import DataStore

logger = logging.getLogger(__name__)

app = FastAPI(title="Complex-time Runge-Kutta", version="1.0.0")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(experiments_router)


@app.on_event("startup")
async def startup_event() -> None:
    store = DataStore()
    store.initialize()
    app.state.store = store
    logger.info("data directory %s", store.data_dir)


@app.get("/api/health")
async def health() -> dict[str, str]:
    return {"status": "ok"}
