"""config settings for gss_replay"""

from pathlib import Path
from typing import Optional

from dotenv import dotenv_values, load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict
from upath import UPath

from .errors import ParseError

load_dotenv()  # Load environment variables from .env file


class Settings(BaseSettings):
    """settings for gss_replay"""

    model_config = SettingsConfigDict(
        env_prefix="GSS_",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="allow",
    )

    OUTPUT_DIRECTORY: Optional[str] = "runs"
    DATA_DIRECTORY: Optional[str] = str(Path.home() / ".cache" / "gss_replay")
    MNIST_BASE_URL: str = "https://storage.googleapis.com/cvdf-datasets/mnist/"
    JSON_LOGS: Optional[bool] = None
    LOG_LEVEL: str = "INFO"

    @property
    def output_directory(self) -> UPath:
        return UPath(self.OUTPUT_DIRECTORY)

    @property
    def data_directory(self) -> UPath:
        return UPath(self.DATA_DIRECTORY)


settings = Settings()  # type: ignore


def read_config_file(path: str | Path) -> dict[str, str]:
    """Read a flat ``key = value`` experiment config.

    Blank lines and ``#`` comments are ignored. Keys are lower-cased and
    hyphens folded to underscores so ``greedy-n`` and ``greedy_n`` agree.

    Raises:
        FileNotFoundError: If the file does not exist
        ParseError: If a key is given without a value
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file '{path}' not found")

    raw = dotenv_values(path, encoding="utf-8")
    values: dict[str, str] = {}
    for row, (key, value) in enumerate(raw.items(), 1):
        if value is None:
            raise ParseError(f"Config key '{key}' has no value in {path}", row)
        values[key.strip().lower().replace("-", "_")] = value.strip()
    return values


if __name__ == "__main__":
    print(settings.model_dump())
