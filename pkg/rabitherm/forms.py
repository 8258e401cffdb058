"""
Validation of raw JSON documents (model files, ensemble specs, peak-ratio scans).

Forms are plain WTForms forms fed with ``data=`` instead of request data. Each form
collects every problem before failing, and ``cleaned_data`` raises ConfigError
listing them.
"""

import json
from pathlib import Path

import numpy as np
from wtforms import Field, FieldList, FloatField, Form, IntegerField, SelectField
from wtforms.validators import NumberRange, StopValidation, ValidationError

from rabitherm.exceptions import ConfigError
from rabitherm.models import BrightProfile, EnsembleSpec, Normalization

MAX_SEED = 2 ** 64 - 1


def load_document(path) -> dict:
    path = Path(path)
    try:
        with path.open(encoding='utf-8') as handle:
            document = json.load(handle)
    except FileNotFoundError as e:
        raise ConfigError(f"File not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    return document


def parse_complex_matrix(rows) -> np.ndarray:
    """Rows of [re, im] pairs (or plain reals) to a complex matrix"""
    if not isinstance(rows, list) or not rows or not all(isinstance(row, list) for row in rows):
        raise ValueError("coupling must be a nonempty list of rows")
    width = len(rows[0])
    matrix = np.zeros((len(rows), width), dtype=complex)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"coupling row {i} has {len(row)} entries, expected {width}")
        for j, entry in enumerate(row):
            try:
                if isinstance(entry, (list, tuple)):
                    if len(entry) != 2:
                        raise ValueError(f"coupling[{i}][{j}] must be a [re, im] pair")
                    matrix[i, j] = complex(float(entry[0]), float(entry[1]))
                else:
                    matrix[i, j] = float(entry)
            except TypeError as e:
                raise ValueError(f"coupling[{i}][{j}] is not numeric") from e
    return matrix


# ---------------------------------------------------------------------------
# Fields and validators
# ---------------------------------------------------------------------------

class JsonFloatField(FloatField):
    """FloatField that converts values handed over through ``data=``"""

    def process_data(self, value):
        self.data = None
        if value is None:
            return
        if isinstance(value, bool):
            raise ValueError("Not a valid float value.")
        try:
            self.data = float(value)
        except (TypeError, ValueError) as e:
            raise ValueError(f"Not a valid float value: {value!r}") from e


class JsonIntegerField(IntegerField):
    """IntegerField that rejects booleans and non-integral numbers"""

    def process_data(self, value):
        self.data = None
        if value is None:
            return
        try:
            number = int(value)
        except (TypeError, ValueError) as e:
            raise ValueError(f"Not a valid integer value: {value!r}") from e
        if isinstance(value, bool) or number != value:
            raise ValueError(f"Not a valid integer value: {value!r}")
        self.data = number


class ComplexMatrixField(Field):
    """Coupling matrix given as rows of [re, im] pairs or plain reals"""

    def process_data(self, value):
        self.data = None
        if value is None:
            return
        self.data = parse_complex_matrix(value)


def required(form, field):
    if field.data is None:
        # Conversion failures already carry their own message
        raise StopValidation(None if field.process_errors else "missing field")


def optional(form, field):
    if field.data is None:
        raise StopValidation()


def _flatten(errors):
    for error in errors:
        if isinstance(error, (list, tuple)):
            yield from _flatten(error)
        elif error:
            yield str(error)


class DocumentForm(Form):
    # FieldList entries; names in scalar_lists also accept a single value
    list_fields = ()
    scalar_lists = ()

    def __init__(self, document: dict = None, **kwargs):
        document = dict(document or {})
        self.document_errors = []
        self.cross_errors = []
        for name in self.list_fields:
            value = document.get(name)
            if value is None or isinstance(value, list):
                continue
            if name in self.scalar_lists:
                document[name] = [value]
            else:
                self.document_errors.append(f"{name}: expected a list")
                del document[name]
        super().__init__(data=document, **kwargs)

    def check_document(self) -> list:
        """Cross-field rules, run once every field is valid"""
        return []

    def validate(self, extra_validators=None):
        valid = super().validate(extra_validators=extra_validators)
        self.cross_errors = self.check_document() if valid else []
        return valid and not self.document_errors and not self.cross_errors

    def error_messages(self) -> list:
        messages = list(self.document_errors)
        for name, errors in self.errors.items():
            for error in _flatten(errors):
                messages.append(f"{name}: {error}" if name else error)
        return messages + self.cross_errors

    @property
    def cleaned_data(self) -> dict:
        if not self.validate():
            raise ConfigError("Invalid document: " + "; ".join(self.error_messages()))
        return dict(self.data)


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------

class ModelForm(DocumentForm):
    list_fields = ('delta_g', 'delta_e')

    omega_f = JsonFloatField(validators=[required])
    omega_a = JsonFloatField(validators=[required, NumberRange(min=0.0, message="must be nonnegative")])
    epsilon = JsonFloatField(validators=[required, NumberRange(min=0.0, message="must be nonnegative")])
    delta_g = FieldList(
        JsonFloatField(validators=[required, NumberRange(-1.0, 1.0, message="detuning out of range")]),
        min_entries=1,
    )
    delta_e = FieldList(
        JsonFloatField(validators=[required, NumberRange(-1.0, 1.0, message="detuning out of range")]),
        min_entries=1,
    )
    coupling = ComplexMatrixField(validators=[required])

    def validate_omega_f(self, field):
        if not field.data > 0:
            raise ValidationError("must be positive")


class EnsembleForm(DocumentForm):
    d_g = JsonIntegerField(validators=[required, NumberRange(min=1)])
    d_e = JsonIntegerField(default=None, validators=[optional, NumberRange(min=1)])
    D = JsonIntegerField(default=None, validators=[optional, NumberRange(min=0)])
    g = JsonFloatField(validators=[required])
    omega_a = JsonFloatField(validators=[required, NumberRange(min=0.0)])
    epsilon = JsonFloatField(default=0.0, validators=[required, NumberRange(min=0.0)])
    normalization = SelectField(
        choices=[(mode, mode.value) for mode in Normalization],
        coerce=Normalization,
        default=Normalization.ENSEMBLE_AVERAGE,
    )
    trials = JsonIntegerField(default=200, validators=[required, NumberRange(min=1)])
    master_seed = JsonIntegerField(
        default=0,
        validators=[required, NumberRange(0, MAX_SEED, message="must be an unsigned 64-bit integer")],
    )
    t_min_log10 = JsonFloatField(default=-3.0, validators=[required])
    t_max_log10 = JsonFloatField(default=0.5, validators=[required])
    t_points = JsonIntegerField(default=400, validators=[required, NumberRange(min=1)])
    theta = JsonIntegerField(default=5, validators=[required, NumberRange(min=0)])
    omega_f = JsonFloatField(default=1.0, validators=[required])

    def validate_g(self, field):
        if not field.data > 0:
            raise ValidationError("g must be positive")

    def check_document(self) -> list:
        d_g, d_e, dark = self.d_g.data, self.d_e.data, self.D.data
        if d_e is None and dark is None:
            return ["one of 'd_e' or 'D' is required"]
        if d_e is not None and dark is not None and d_e != d_g + dark:
            return ["'d_e' and 'D' disagree"]
        return []

    def to_spec(self) -> EnsembleSpec:
        data = self.cleaned_data
        d_e = data['d_e'] if data['d_e'] is not None else data['d_g'] + data['D']
        return EnsembleSpec(
            d_g=data['d_g'],
            d_e=d_e,
            g=data['g'],
            omega_a=data['omega_a'],
            epsilon=data['epsilon'],
            normalization=data['normalization'],
            trials=data['trials'],
            master_seed=data['master_seed'],
            t_min_log10=data['t_min_log10'],
            t_max_log10=data['t_max_log10'],
            t_points=data['t_points'],
            theta=data['theta'],
            omega_f=data['omega_f'],
        )


class PeakRatioForm(DocumentForm):
    list_fields = ('d_g', 'D', 'g')
    scalar_lists = ('d_g', 'D', 'g')

    d_g = FieldList(JsonIntegerField(validators=[required, NumberRange(min=1)]), min_entries=1)
    D = FieldList(
        JsonIntegerField(validators=[required, NumberRange(min=0, message="dark counts must be nonnegative")]),
        min_entries=1,
    )
    g = FieldList(JsonFloatField(validators=[required]), min_entries=1)
    omega_a = JsonFloatField(validators=[required, NumberRange(min=0.0)])
    bright_profile = SelectField(
        choices=[(profile, profile.value) for profile in BrightProfile],
        coerce=BrightProfile,
        default=BrightProfile.FIXED,
    )
    epsilon = JsonFloatField(default=0.0, validators=[required])

    def validate_D(self, field):
        values = [value for value in field.data if value is not None]
        if values != sorted(values):
            raise ValidationError("D must be ascending")

    def validate_g(self, field):
        if any(value is not None and not value > 0 for value in field.data):
            raise ValidationError("g must be positive")

    def validate_epsilon(self, field):
        if field.data != 0.0:
            raise ValidationError("peak-ratio scans run at zero detuning spread")
