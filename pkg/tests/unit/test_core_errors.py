import json

import numpy as np
import pytest

from app.core.errors import (
    ChainMismatchError,
    ErrorClass,
    FilterDivergenceError,
    NonFiniteError,
    SchemaError,
    classify_error,
    require_finite,
)


def test_own_errors_keep_class_and_context():
    classified = classify_error(SchemaError("bad row", row=7, value=None))
    assert classified.error_class == ErrorClass.SCHEMA
    assert classified.exit_code == 2
    assert classified.context == {"row": 7}
    payload = json.loads(classified.to_json())
    assert payload == {
        "context": {"row": "7"},
        "error": "schema",
        "exception": "SchemaError",
        "exit_code": 2,
        "message": "bad row",
    }


def test_numerical_failures_exit_with_three():
    assert classify_error(FilterDivergenceError("diverged")).exit_code == 3
    assert classify_error(np.linalg.LinAlgError("singular")).error_class == ErrorClass.NON_FINITE


@pytest.mark.parametrize(
    "exc, expected",
    [
        (FileNotFoundError("x.csv"), ErrorClass.IO),
        (ChainMismatchError("other config"), ErrorClass.CHAIN_MISMATCH),
        (RuntimeError("boom"), ErrorClass.UNKNOWN),
    ],
)
def test_foreign_and_own_errors(exc, expected):
    assert classify_error(exc).error_class == expected


def test_message_includes_context():
    assert str(SchemaError("bad row", row=3)) == "bad row (row=3)"


def test_require_finite():
    require_finite("ok", np.ones(3), [1.0, 2.0])
    with pytest.raises(NonFiniteError):
        require_finite("bad", np.array([1.0, np.inf]))
