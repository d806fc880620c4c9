"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map it without a lookup
table: 2 for bad input or parameters, 3 for runtime failures.
"""


class SubselError(Exception):
    exit_code = 3

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class ValidationError(SubselError):
    exit_code = 2


class InvalidDataset(ValidationError):
    def __init__(self, report):
        self.report = list(report)
        super().__init__("; ".join(self.report) or "invalid dataset")

    def to_dict(self):
        d = super().to_dict()
        d["issues"] = self.report
        return d


class FormatError(ValidationError):
    """Malformed feature file. ``row``/``column`` are 1-based when known."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        super().__init__(f"{', '.join(loc)}: {message}" if loc else message)

    def to_dict(self):
        d = super().to_dict()
        d["row"] = self.row
        d["column"] = self.column
        return d


class MissingLabels(ValidationError):
    pass


class ZeroNormRow(ValidationError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"row {row} has zero norm; cosine similarity undefined")


class NonPositiveGamma(ValidationError):
    pass


class BadNeighborCount(ValidationError):
    pass


class MemoryBudgetExceeded(SubselError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class AlreadySelected(ValidationError):
    pass


class BadWeights(ValidationError):
    pass


class BadBudget(ValidationError):
    pass


class NotSubmodular(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class InvalidSimplex(ValidationError):
    pass


class EmptyTrainingSet(ValidationError):
    pass


class BadK(ValidationError):
    pass


class SingleClassPool(ValidationError):
    pass


class EmptyPool(ValidationError):
    pass


class ConfigInvalid(ValidationError):
    pass


class BadSpec(ValidationError):
    pass
