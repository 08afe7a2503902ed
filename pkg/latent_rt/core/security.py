from typing import Optional

from fastapi import Depends, HTTPException, status
from fastapi.security import HTTPAuthorizationCredentials, HTTPBearer

from latent_rt.core.config import settings

# auto_error=False so an API without a configured token accepts anonymous calls
bearer_scheme = HTTPBearer(auto_error=False)


def verify_token(credentials: Optional[HTTPAuthorizationCredentials] = Depends(bearer_scheme)):
    """
    A FastAPI dependency that verifies the provided Bearer token.

    When settings.api_bearer_token is unset every request passes. Otherwise the
    request's 'Authorization: Bearer <token>' header must carry that token.

    Raises:
        HTTPException: 403 if a token is required and missing or wrong.
    """
    expected = settings.api_bearer_token
    if expected is None:
        return credentials
    if not credentials or credentials.scheme != "Bearer" or credentials.credentials != expected:
        raise HTTPException(
            status_code=status.HTTP_403_FORBIDDEN,
            detail="Invalid or missing authentication token.",
        )
    return credentials
