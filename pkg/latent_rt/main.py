from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from latent_rt import __version__
from latent_rt.api.endpoints import run as run_router
from latent_rt.core.config import configure_logging

configure_logging()

# Create the FastAPI application instance
app = FastAPI(
    title="Latent Reaction-Time Model API",
    description="Simulation, likelihood evaluation and maximum-likelihood fitting "
                "of the joint increment / log reaction-time mixed model.",
    version=__version__,
)

# --- Add CORS Middleware ---
# Lets browser-based notebooks on other origins call the API.
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# --- Include the API Router ---
# This incorporates the /loglik, /fit and /check endpoints from run.py.
app.include_router(
    run_router.router,
    prefix="/api/v1",
    tags=["Workflows"],
)


# A simple health check endpoint to confirm the API is running
@app.get("/health", tags=["Health Check"])
def health_check():
    return {"status": "ok", "version": __version__}
