import asyncio

import httpx

from .app import app

__all__ = ["app", "in_process_client"]


class _SyncASGITransport(httpx.BaseTransport):
    """Sync bridge over the async ASGI transport so the thin client can run
    without a socket."""

    def __init__(self, asgi_app):
        self._transport = httpx.ASGITransport(app=asgi_app)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        async def _dispatch():
            response = await self._transport.handle_async_request(request)
            body = await response.aread()
            await response.aclose()
            return response, body

        response, body = asyncio.run(_dispatch())
        return httpx.Response(status_code=response.status_code,
                              headers=response.headers, content=body)


def in_process_client(base_url: str = "http://ergmsearch.internal",
                      **kwargs) -> httpx.Client:
    """httpx client mounted directly on the service app (no server needed)."""
    return httpx.Client(transport=_SyncASGITransport(app),
                        base_url=base_url, **kwargs)
