"""File I/O utilities."""

import json
from pathlib import Path
from typing import Any, Dict, List, Sequence

import pandas as pd
import yaml
from pydantic import BaseModel, ValidationError, model_validator

from src.rgn import FileFormatError, InvalidInputError, IterationTrace
from src.rgn.cpd_model import Tensor
from src.rgn.manifold import ProductPoint, make_shape


TRACE_COLUMNS = ["iter", "error", "residual", "grad_norm", "step_norm", "sigma_min", "kappa"]
BOUNDS_COLUMNS = [
    "s", "kappa_star", "residual_star", "C_hat", "E_hat",
    "theoretical_rate", "fitted_rate", "fitted_order",
]
BOUND_CURVE_COLUMNS = ["iter", "error", "theoretical_bound", "heuristic_bound"]


class TensorFile(BaseModel):
    """On-disk tensor: dims plus entries with the first index slowest."""

    dims: List[int]
    data: List[float]


class DecompositionFile(BaseModel):
    """On-disk decomposition: factors[term][mode][entry]."""

    rank: int
    factors: List[List[List[float]]]

    @model_validator(mode="after")
    def _rank_matches(self) -> "DecompositionFile":
        if self.rank != len(self.factors):
            raise ValueError(f"rank is {self.rank} but {len(self.factors)} terms are listed")
        return self


def load_config(config_path: str) -> Dict:
    """
    Load configuration from YAML file.

    Args:
        config_path: Path to config file

    Returns:
        Configuration dictionary
    """
    with open(config_path, 'r') as f:
        return yaml.safe_load(f) or {}


def save_json(data: Any, output_path: str, pretty: bool = True) -> None:
    """
    Save data as JSON.

    Args:
        data: Data to save
        output_path: Output file path
        pretty: Whether to pretty-print
    """
    Path(output_path).parent.mkdir(parents=True, exist_ok=True)

    with open(output_path, 'w') as f:
        if pretty:
            json.dump(data, f, indent=2)
        else:
            json.dump(data, f)


def load_json(input_path: str) -> Any:
    """
    Load data from JSON file.

    Raises:
        FileFormatError: if the file is not valid JSON (reports line and column)
    """
    with open(input_path, 'r') as f:
        text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FileFormatError(str(input_path), f"line {e.lineno} column {e.colno}", e.msg)


def _parse(model: type, payload: Any, path: str) -> BaseModel:
    try:
        return model.model_validate(payload)
    except ValidationError as e:
        err = e.errors()[0]
        location = ".".join(str(part) for part in err["loc"]) or "<root>"
        raise FileFormatError(str(path), f"field {location}", err["msg"])


def load_tensor(input_path: str) -> Tensor:
    """Read a tensor file ({"dims": [...], "data": [...]})."""
    parsed = _parse(TensorFile, load_json(input_path), input_path)
    try:
        return Tensor(shape=make_shape(parsed.dims), data=parsed.data)
    except InvalidInputError as e:
        raise FileFormatError(str(input_path), "field data", str(e))


def save_tensor(tensor: Tensor, output_path: str) -> None:
    save_json({"dims": list(tensor.shape.mode_sizes), "data": tensor.data.tolist()}, output_path)


def load_decomposition(input_path: str) -> ProductPoint:
    """Read a decomposition file ({"rank": r, "factors": [[[...], ...], ...]})."""
    parsed = _parse(DecompositionFile, load_json(input_path), input_path)
    try:
        return ProductPoint.from_factors(parsed.factors)
    except InvalidInputError as e:
        raise FileFormatError(str(input_path), "field factors", str(e))


def save_decomposition(point: ProductPoint, output_path: str) -> None:
    payload = {
        "rank": point.rank,
        "factors": [[f.tolist() for f in term.factors] for term in point.terms],
    }
    save_json(payload, output_path)


def save_csv(rows: Sequence[Dict[str, Any]], output_path: str, columns: Sequence[str]) -> None:
    """Write rows with a fixed header; missing values are written as nan."""
    Path(output_path).parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(output_path, index=False, na_rep="nan", lineterminator="\n")


def save_trace_csv(trace: IterationTrace, output_path: str) -> None:
    save_csv([r.model_dump() for r in trace.records], output_path, TRACE_COLUMNS)


def save_text(content: str, output_path: str) -> None:
    """
    Save text content to file.

    Args:
        content: Text content
        output_path: Output file path
    """
    Path(output_path).parent.mkdir(parents=True, exist_ok=True)

    with open(output_path, 'w') as f:
        f.write(content)


def ensure_dir(path: str) -> None:
    """
    Ensure directory exists.

    Args:
        path: Directory path
    """
    Path(path).mkdir(parents=True, exist_ok=True)
