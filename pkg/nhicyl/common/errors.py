"""
🌀 nhicyl.common.errors

Contains the exception hierarchy raised throughout `nhicyl`. Every error
derives from `NHICError`, with one intermediate base per pipeline stage.
"""

from typing import Any, Optional, Sequence

__all__ = [
    "NHICError",
    # model
    "ModelError",
    "HessianNotPositiveDefinite",
    "RepeatedExponent",
    "ResonanceDetected",
    # flow
    "FlowError",
    "StepSizeUnderflow",
    "BlowUp",
    "EventNotReached",
    "TangentialCrossing",
    "EnergyDriftExceeded",
    # localframe
    "ChartError",
    "SmallDivisor",
    "RadiusTooLarge",
    "OutOfChart",
    "ConeViolated",
    # homoclinics
    "HomoclinicError",
    "NoConvergence",
    "EscapedDomain",
    "TangencyDetected",
    "WrongApproachDirection",
    "NoCoveringFound",
    # sectionmaps
    "SectionMapError",
    "LeftTube",
    "TransitTimeDeviation",
    "NotInInnerDomain",
    "WrongEnergySign",
    "TangentialExit",
    # continuation
    "ContinuationError",
    "NewtonDiverged",
    "WrongShadowingOrder",
    "EnergyOutOfRange",
    "ContinuationStalled",
    "DefectiveSpectrum",
    "ContractionFailed",
    "InconsistentChain",
    # cylinder
    "CylinderError",
    "InconsistentCovering",
    "MissingFamily",
    "InsufficientRange",
    "FamiliesTooShort",
    "TooFewPoints",
    "GapNotResolved",
    # cli
    "CLIError",
    "ConfigInvalid",
    "StageMissing",
    "CheckFailed",
]


class NHICError(Exception):
    """
    An error raised by the `nhicyl` package.
    """

    pass


# ----------------------------------------------------------------------------
# Model
# ----------------------------------------------------------------------------


class ModelError(NHICError):
    """
    An error raised while defining a system or analyzing its saddle.
    """


class HessianNotPositiveDefinite(ModelError):
    def __init__(self, eigenvalues: Sequence[float]):
        self.eigenvalues = list(eigenvalues)
        super().__init__(
            f"Hessian of V at the minimum is not positive definite "
            f"(eigenvalues {self.eigenvalues})"
        )


class RepeatedExponent(ModelError):
    def __init__(self, gap: float, tolerance: float):
        self.gap = gap
        self.tolerance = tolerance
        super().__init__(
            f"Saddle exponents are not distinct: gap {gap:.3e} < {tolerance:.1e}"
        )


class ResonanceDetected(ModelError):
    def __init__(self, k: Sequence[int], value: float):
        self.k = tuple(int(c) for c in k)
        self.value = value
        super().__init__(f"Resonance <k, lambda> = {value:.3e} for k = {self.k}")


# ----------------------------------------------------------------------------
# Flow
# ----------------------------------------------------------------------------


class FlowError(NHICError):
    """
    An error raised while integrating the flow or its variational equations.
    """


class StepSizeUnderflow(FlowError):
    def __init__(self, t: float, message: str = ""):
        self.t = t
        super().__init__(f"Step size underflow at t = {t:.6g}. {message}".strip())


class BlowUp(FlowError):
    def __init__(self, t: float, norm: float, bound: float):
        self.t = t
        self.norm = norm
        self.bound = bound
        super().__init__(
            f"|z| = {norm:.3e} exceeded the bound {bound:.3e} at t = {t:.6g}"
        )


class EventNotReached(FlowError):
    def __init__(self, t_max: float, event: Any = None):
        self.t_max = t_max
        self.event = event
        super().__init__(f"Event {event!r} not reached before t_max = {t_max:.6g}")


class TangentialCrossing(FlowError):
    def __init__(self, t: float, derivative: float):
        self.t = t
        self.derivative = derivative
        super().__init__(
            f"Grazing crossing at t = {t:.6g} (event rate {derivative:.3e})"
        )


class EnergyDriftExceeded(FlowError):
    def __init__(self, t: float, drift: float, bound: float):
        self.t = t
        self.drift = drift
        self.bound = bound
        super().__init__(
            f"Energy drift {drift:.3e} exceeds {bound:.3e} at t = {t:.6g}"
        )


# ----------------------------------------------------------------------------
# Local chart
# ----------------------------------------------------------------------------


class ChartError(NHICError):
    """
    An error raised while building or evaluating the local chart at the saddle.
    """


class SmallDivisor(ChartError):
    def __init__(self, alpha: Sequence[int], component: int, divisor: float):
        self.alpha = tuple(int(a) for a in alpha)
        self.component = component
        self.divisor = divisor
        super().__init__(
            f"Small divisor {divisor:.3e} at multi-index {self.alpha}, "
            f"component {component}"
        )


class RadiusTooLarge(ChartError):
    def __init__(self, radius: float, residual: float, tolerance: float):
        self.radius = radius
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"Chart residual {residual:.3e} at radius {radius:.3e} "
            f"exceeds {tolerance:.1e}"
        )


class OutOfChart(ChartError):
    def __init__(self, norm: float, radius: float):
        self.norm = norm
        self.radius = radius
        super().__init__(f"Point of norm {norm:.3e} outside chart radius {radius:.3e}")


class ConeViolated(ChartError):
    def __init__(self, t: float, xi: Any, margin: float):
        self.t = t
        self.xi = xi
        self.margin = margin
        super().__init__(f"Cone violated at t = {t:.6g} (margin {margin:.3e})")


# ----------------------------------------------------------------------------
# Homoclinics
# ----------------------------------------------------------------------------


class HomoclinicError(NHICError):
    """
    An error raised while shooting for or certifying homoclinic orbits.
    """


class NoConvergence(HomoclinicError):
    def __init__(self, seed: Any, mismatch: float):
        self.seed = seed
        self.mismatch = mismatch
        super().__init__(
            f"Homoclinic shooting from seed {seed!r} did not converge "
            f"(mismatch {mismatch:.3e})"
        )


class EscapedDomain(HomoclinicError):
    def __init__(self, seed: Any, message: str = ""):
        self.seed = seed
        super().__init__(f"Orbit from seed {seed!r} escaped the domain. {message}".strip())


class TangencyDetected(HomoclinicError):
    def __init__(self, margin: float, tolerance: float):
        self.margin = margin
        self.tolerance = tolerance
        super().__init__(
            f"Stable and unstable manifolds are tangent: margin {margin:.3e} "
            f"< {tolerance:.1e}"
        )


class WrongApproachDirection(HomoclinicError):
    def __init__(self, end: str, angle: float):
        self.end = end
        self.angle = angle
        super().__init__(
            f"Orbit approaches the saddle off the weakest direction at the "
            f"{end} end (angle {angle:.3e} rad)"
        )


class NoCoveringFound(HomoclinicError):
    def __init__(self, h_max: int, ell_max: int):
        self.h_max = h_max
        self.ell_max = ell_max
        super().__init__(
            f"No covering torus with h <= {h_max} and shift count <= {ell_max} "
            f"closes the chain without self-intersection"
        )


# ----------------------------------------------------------------------------
# Section maps
# ----------------------------------------------------------------------------


class SectionMapError(NHICError):
    """
    An error raised by the outer or inner section maps.
    """


class LeftTube(SectionMapError):
    def __init__(self, distance: float, radius: float):
        self.distance = distance
        self.radius = radius
        super().__init__(
            f"Orbit left the tube around its homoclinic: distance {distance:.3e} "
            f"> {radius:.3e}"
        )


class TransitTimeDeviation(SectionMapError):
    def __init__(self, t: float, expected: float, tolerance: float):
        self.t = t
        self.expected = expected
        self.tolerance = tolerance
        super().__init__(
            f"Outer transit {t:.6g} is more than {tolerance:.0%} away from the "
            f"homoclinic's outer time {expected:.6g}"
        )


class NotInInnerDomain(SectionMapError):
    def __init__(self, t: float, message: str = ""):
        self.t = t
        super().__init__(
            f"Orbit left the chart ball at t = {t:.6g} before its exit section. "
            f"{message}".strip()
        )


class WrongEnergySign(SectionMapError):
    def __init__(self, energy: float, side: float):
        self.energy = energy
        self.side = side
        super().__init__(f"Exit side {side:+.0f} inconsistent with energy {energy:.3e}")


class TangentialExit(SectionMapError):
    def __init__(self, component: float):
        self.component = component
        super().__init__(
            f"Vector field nearly tangent to the target section ({component:.3e})"
        )


# ----------------------------------------------------------------------------
# Continuation
# ----------------------------------------------------------------------------


class ContinuationError(NHICError):
    """
    An error raised while solving for or continuing periodic orbits.
    """


class NewtonDiverged(ContinuationError):
    def __init__(self, energy: float, residual: float, iterations: int):
        self.energy = energy
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"Newton diverged at E = {energy:.3e} after {iterations} iterations "
            f"(residual {residual:.3e})"
        )


class WrongShadowingOrder(ContinuationError):
    def __init__(self, expected: Sequence[Any], found: Sequence[Any]):
        self.expected = list(expected)
        self.found = list(found)
        super().__init__(f"Itinerary {self.found} differs from {self.expected}")


class EnergyOutOfRange(ContinuationError):
    def __init__(self, energy: float, e0: float):
        self.energy = energy
        self.e0 = e0
        super().__init__(f"Energy {energy:.3e} outside 0 < |E| <= {e0:.3e}")


class ContinuationStalled(ContinuationError):
    def __init__(self, energy: float, step: float):
        self.energy = energy
        self.step = step
        super().__init__(
            f"Continuation stalled at E = {energy:.3e} (relative step {step:.3e})"
        )


class DefectiveSpectrum(ContinuationError):
    def __init__(self, defect: float, tolerance: float):
        self.defect = defect
        self.tolerance = tolerance
        super().__init__(
            f"Floquet multipliers do not pair reciprocally: defect {defect:.3e} "
            f"> {tolerance:.1e}"
        )


class ContractionFailed(ContinuationError):
    def __init__(self, history: Sequence[float]):
        self.history = list(history)
        super().__init__(
            f"Graph transform failed to contract (last sup-changes "
            f"{[f'{h:.2e}' for h in self.history[-3:]]})"
        )


class InconsistentChain(ContinuationError):
    def __init__(self, message: str):
        super().__init__(message)


# ----------------------------------------------------------------------------
# Cylinder
# ----------------------------------------------------------------------------


class CylinderError(NHICError):
    """
    An error raised while assembling or verifying the cylinder.
    """


class InconsistentCovering(CylinderError):
    def __init__(self, message: str):
        super().__init__(message)


class MissingFamily(InconsistentCovering):
    def __init__(self, side: str):
        self.side = side
        super().__init__(f"No periodic orbit family on the {side} energy side")


class InsufficientRange(CylinderError):
    def __init__(self, decades: float, required: float):
        self.decades = decades
        self.required = required
        super().__init__(
            f"Energy range spans {decades:.2f} decades, {required:.0f} required"
        )


class FamiliesTooShort(CylinderError):
    def __init__(self, smallest: float, required: float):
        self.smallest = smallest
        self.required = required
        super().__init__(
            f"Families reach |E| = {smallest:.3e}, need |E| <= {required:.1e}"
        )


class TooFewPoints(CylinderError):
    def __init__(self, count: int, required: int):
        self.count = count
        self.required = required
        super().__init__(f"Only {count} points available, {required} required")


class GapNotResolved(CylinderError):
    def __init__(self, gap: float, sigma: float):
        self.gap = gap
        self.sigma = sigma
        super().__init__(
            f"Rate gap {gap:.3e} not resolved at 3 sigma (sigma {sigma:.3e})"
        )


# ----------------------------------------------------------------------------
# CLI
# ----------------------------------------------------------------------------


class CLIError(NHICError):
    """
    An error raised by the command line orchestrator.
    """


class ConfigInvalid(CLIError):
    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{message}")


class StageMissing(CLIError):
    def __init__(self, stage: str, path: str):
        self.stage = stage
        self.path = path
        super().__init__(f"Stage '{stage}' has no artifact at {path}")


class CheckFailed(CLIError):
    def __init__(self, failed: Sequence[str]):
        self.failed = list(failed)
        super().__init__(f"Checks failed: {', '.join(self.failed)}")
