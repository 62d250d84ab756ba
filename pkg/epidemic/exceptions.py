"""
Solver errors.

Each error carries a ``default_detail`` / ``default_code`` pair in the style of
``rest_framework.exceptions.APIException`` so the runner can report a stable
machine-readable code next to the message.
"""


class SolverError(Exception):
    default_detail = 'Solver error.'
    default_code = 'solver_error'

    def __init__(self, detail=None, code=None):
        self.detail = detail if detail is not None else self.default_detail
        self.code = code if code is not None else self.default_code
        super().__init__(self.detail)

    def __str__(self):
        return str(self.detail)


# Mesh and kernel construction
class InvalidDomain(SolverError):
    default_detail = 'Domain must satisfy b > a and n >= 2.'
    default_code = 'invalid_domain'


class KernelTooNarrow(SolverError):
    default_detail = 'Kernel support is narrower than two mesh cells.'
    default_code = 'kernel_too_narrow'


class NegativeParameter(SolverError):
    default_detail = 'Parameter must be positive.'
    default_code = 'negative_parameter'


class LengthMismatch(SolverError):
    default_detail = 'Field length does not match the mesh.'
    default_code = 'length_mismatch'


# Operators and spectra
class NonpositiveDiffusivity(SolverError):
    default_detail = 'Diffusivity must be positive.'
    default_code = 'nonpositive_diffusivity'


class NonpositiveRate(SolverError):
    default_detail = 'Rate field must be strictly positive at every node.'
    default_code = 'nonpositive_rate'


class AsymmetricOperator(SolverError):
    default_detail = 'Operator is not symmetric.'
    default_code = 'asymmetric_operator'


class NonpositiveEigenvector(SolverError):
    default_detail = 'Principal eigenvector changes sign.'
    default_code = 'nonpositive_eigenvector'


class SingularOperator(SolverError):
    default_detail = '-A is not positive definite.'
    default_code = 'singular_operator'


class InvalidBracket(SolverError):
    default_detail = 'Bracket must satisfy d_lo < d_hi.'
    default_code = 'invalid_bracket'


# Equilibria
class SubcriticalRegime(SolverError):
    default_detail = 'No positive steady state: the problem is subcritical.'
    default_code = 'subcritical_regime'


class NoConvergence(SolverError):
    default_detail = 'Iteration did not converge.'
    default_code = 'no_convergence'


class BracketViolation(SolverError):
    default_detail = 'Monotone bracket lost its ordering.'
    default_code = 'bracket_violation'


class OutOfRange(SolverError):
    default_detail = 'Reduced infection field must lie in (0, 1).'
    default_code = 'out_of_range'


class AssumptionViolated(SolverError):
    default_detail = 'Standing assumption on the rates is violated.'
    default_code = 'assumption_violated'


# Dynamics
class NegativeState(SolverError):
    default_detail = 'State has negative entries.'
    default_code = 'negative_state'


class StepTooLarge(SolverError):
    default_detail = 'Time step exceeds the explicit stability bound.'
    default_code = 'step_too_large'


class StepCollapse(SolverError):
    default_detail = 'Step halving exhausted while keeping the state nonnegative.'
    default_code = 'step_collapse'


class MassDrift(SolverError):
    default_detail = 'Total population drifted away from N.'
    default_code = 'mass_drift'


class MassMismatch(SolverError):
    default_detail = 'Initial state does not carry the total population N.'
    default_code = 'mass_mismatch'


class DivisionGuard(SolverError):
    default_detail = 'Equilibrium has a vanishing component.'
    default_code = 'division_guard'


class TaskFailed(SolverError):
    default_code = 'task_failed'

    def __init__(self, task, cause):
        self.task = task
        self.cause = cause
        code = getattr(cause, 'code', self.default_code)
        super().__init__(f'{task}: {cause}', code=code)
