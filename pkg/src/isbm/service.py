"""HTTP facade over the toolkit: simulation, kernel evaluation, verification
suites, and the coupled stability experiment as JSON endpoints."""

from __future__ import annotations

import io

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, model_validator

from . import verify
from .alpha import AlphaStep, load_alpha_csv, parse_alpha_inline
from .construct import construct_isbm
from .kernel import QuadratureError, density_on_grid
from .paths import RngSpec, make_grid, simulate_bm, write_paths_csv

__all__ = ["app", "create_app"]


class AlphaMixin(BaseModel):
    alpha: str | None = Field(default=None, description="inline step spec `t0:a0,t1:a1,...`")
    alpha_csv: str | None = Field(default=None, description="contents of a `t,alpha` CSV")

    @model_validator(mode="after")
    def _one_alpha_source(self):
        if self.alpha is None and self.alpha_csv is None:
            raise ValueError("provide alpha or alpha_csv")
        return self

    def alpha_step(self) -> AlphaStep:
        if self.alpha is not None:
            return parse_alpha_inline(self.alpha)
        return load_alpha_csv(io.StringIO(self.alpha_csv))


class SimulateRequest(AlphaMixin):
    horizon: float = 1.0
    dt: float = 1e-3
    paths: int = Field(default=1, ge=1, le=100_000)
    seed: int = Field(default=0, ge=0)
    x0: float = 0.0
    threads: int = Field(default=1, ge=1, le=256)


class SimulateResponse(BaseModel):
    csv: str
    meta: dict


class DensityRequest(AlphaMixin):
    s: float = 0.0
    t: float = 1.0
    x: float = 0.0
    y_min: float = -3.0
    y_max: float = 3.0
    y_step: float = Field(default=0.01, gt=0)
    quad_tol: float = Field(default=1e-8, gt=0)


class DensityResponse(BaseModel):
    csv: str
    meta: dict


class VerifyRequest(AlphaMixin):
    suite: str = "all"
    paths: int | None = Field(default=None, ge=100)
    dt: float | None = Field(default=None, gt=0)
    eps: float | None = Field(default=None, gt=0)
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1, le=256)
    t: float | None = None
    s: float | None = None
    x: float = 0.0
    quad_tol: float = Field(default=1e-8, gt=0)
    horizon: float = Field(default=1.0, gt=0)


class VerifyResponse(BaseModel):
    reports: list[dict]
    passed: bool


class StabilityRequest(AlphaMixin):
    alpha_seq: list[str] = Field(min_length=1, description="inline step specs, coarse to fine")
    paths: int = Field(default=2_000, ge=100)
    dt: float = Field(default=1e-4, gt=0)
    horizon: float = Field(default=1.0, gt=0)
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1, le=256)


class StabilityResponse(BaseModel):
    csv: str
    report: dict


def create_app() -> FastAPI:
    app = FastAPI(title="isbm", description="Skew Brownian path construction and verification")

    @app.exception_handler(ValueError)
    async def _value_error(request, exc):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest) -> SimulateResponse:
        alpha = req.alpha_step()
        grid = make_grid(0.0, req.horizon, req.dt)

        def worker(p: int):
            rng = RngSpec(req.seed, p)
            bm = simulate_bm(grid, rng, req.x0)
            x, _ = construct_isbm(bm, alpha, rng)
            return x

        paths = verify._map_paths(req.paths, worker, req.threads)
        buf = io.StringIO()
        write_paths_csv(paths, buf)
        return SimulateResponse(
            csv=buf.getvalue(),
            meta={"horizon": req.horizon, "dt": req.dt, "paths": req.paths,
                  "seed": req.seed, "x0": req.x0},
        )

    @app.post("/density", response_model=DensityResponse)
    def density(req: DensityRequest) -> DensityResponse:
        if req.y_max <= req.y_min:
            raise HTTPException(status_code=400, detail="y_max must exceed y_min")
        alpha = req.alpha_step()
        ys = np.arange(req.y_min, req.y_max + req.y_step / 2, req.y_step)
        try:
            ps, errs = density_on_grid(req.s, req.t, req.x, alpha, ys,
                                       quad_tol=req.quad_tol, with_errors=True)
        except QuadratureError as exc:
            raise HTTPException(status_code=422, detail=f"quadrature failed: {exc}") from exc
        buf = io.StringIO()
        buf.write("y,p\n")
        for y, p in zip(ys, ps):
            buf.write(f"{repr(float(y))},{repr(float(p))}\n")
        return DensityResponse(
            csv=buf.getvalue(),
            meta={"s": req.s, "t": req.t, "x": req.x, "quad_tol": req.quad_tol,
                  "points": int(ys.size), "max_error_estimate": float(np.max(errs)),
                  "sum_error_estimate": float(np.sum(errs))},
        )

    @app.post("/verify", response_model=VerifyResponse)
    def run_verify(req: VerifyRequest) -> VerifyResponse:
        alpha = req.alpha_step()
        reports = verify.run_suite(
            req.suite, alpha, paths=req.paths, dt=req.dt, eps=req.eps, seed=req.seed,
            threads=req.threads, t=req.t, s=req.s, x=req.x, quad_tol=req.quad_tol,
            horizon=req.horizon,
        )
        return VerifyResponse(
            reports=[r.to_dict() for r in reports],
            passed=all(r.passed for r in reports),
        )

    @app.post("/stability", response_model=StabilityResponse)
    def stability(req: StabilityRequest) -> StabilityResponse:
        limit = req.alpha_step()
        seq = [parse_alpha_inline(text) for text in req.alpha_seq]
        report = verify.stability_experiment(
            seq, limit, n_paths=req.paths, dt=req.dt, horizon=req.horizon,
            seed=req.seed, threads=req.threads,
        )
        buf = io.StringIO()
        buf.write("n,D,se\n")
        for i, (d, se) in enumerate(zip(report.stats["d"], report.stats["d_se"])):
            buf.write(f"{i},{repr(float(d))},{repr(float(se))}\n")
        return StabilityResponse(csv=buf.getvalue(), report=report.to_dict())

    return app


app = create_app()
