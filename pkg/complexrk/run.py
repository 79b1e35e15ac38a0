from uvicorn import run

from .storage import DataStore


def _read_api_port() -> int:
    default_port = 8080
    port = DataStore().read_settings().get("api_port", default_port)
    if not isinstance(port, int) or not (1 <= port <= 65535):
        return default_port
    return port


if __name__ == "__main__":
    run("complexrk.app:app", host="0.0.0.0", port=_read_api_port(), reload=True)
