"""FastAPI application: every pipeline operation behind one service."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ForgeError
from .routes import router


def create_app() -> FastAPI:
    app = FastAPI(title="cqaforge", version=__version__)
    app.include_router(router)

    @app.exception_handler(ForgeError)
    async def forge_error_handler(request: Request, exc: ForgeError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": str(exc), "type": type(exc).__name__})

    return app


app = create_app()
