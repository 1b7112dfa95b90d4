from typing import Dict, Optional


class LimclustError(Exception):
    """Base error; the CLI maps it to an exit code"""
    exit_code = 2
    kind = 'error'

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> Dict:
        return {'error': self.kind, 'message': self.message}


class InputError(LimclustError):
    """Malformed input: ids out of range, bad files, misaligned sequences"""
    kind = 'input'


class ConfigError(InputError):
    kind = 'config'


class UsageError(InputError):
    """Command-line arguments argparse rejects"""
    kind = 'usage'


class FormulaSyntaxError(InputError):
    kind = 'syntax'

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column

    def to_dict(self) -> Dict:
        out = super().to_dict()
        out.update({'line': self.line, 'column': self.column})
        return out


class LocalityError(FormulaSyntaxError):
    """Quantifier without a distance guard"""
    kind = 'locality'


class DomainError(LimclustError):
    """Renormalisation by a zero-measure set"""
    kind = 'domain'


class AlgebraError(LimclustError):
    """A weak-algebra precondition failed on a witness structure"""
    kind = 'algebra'

    def __init__(self, message: str, witness: Optional[Dict] = None):
        super().__init__(message)
        self.witness = witness

    def to_dict(self) -> Dict:
        out = super().to_dict()
        out['witness'] = self.witness
        return out


class PreconditionError(LimclustError):
    kind = 'precondition'


class InternalError(LimclustError):
    """Any other exception reaching the command line, kept apart from verification failures"""
    exit_code = 3
    kind = 'internal'

    def __init__(self, cause: Exception):
        super().__init__(f"{type(cause).__name__}: {cause}")
        self.cause = type(cause).__name__

    def to_dict(self) -> Dict:
        out = super().to_dict()
        out['type'] = self.cause
        return out
