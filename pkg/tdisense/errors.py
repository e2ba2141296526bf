"""
Error types and JSON error handlers for tdi-sense
"""
from flask import Blueprint, current_app, jsonify
import traceback

errors = Blueprint('errors', __name__)


class TdiError(Exception):
    """Base class for tdi-sense errors"""
    status_code = 500
    message = "An error occurred"

    def __init__(self, message=None, status_code=None):
        if message:
            self.message = message
        if status_code:
            self.status_code = status_code
        super().__init__(self.message)


class ValidationError(TdiError):
    """Invalid experiment configuration or request payload"""
    status_code = 400
    message = "Invalid configuration"


class NonHermitianInput(TdiError):
    """Generator or observable is not Hermitian"""
    status_code = 422
    message = "Operator is not Hermitian"


class BadSubsystemIndex(TdiError):
    status_code = 422
    message = "Subsystem index out of range"


class NonUnitaryInput(TdiError):
    status_code = 422
    message = "Operator is not unitary"


class DimMismatch(TdiError):
    status_code = 422
    message = "Operand dimensions do not match"


class InvalidDistribution(TdiError):
    """Probability vector or dilation law is malformed"""
    status_code = 422
    message = "Invalid probability distribution"


class DecouplingViolation(TdiError):
    """Interrogation time misses the decoupling condition of a free-evolution strategy"""
    status_code = 422
    message = "Interrogation time violates the decoupling condition"


class DrawLengthMismatch(TdiError):
    status_code = 422
    message = "Dilation draw length does not match the strategy"


class EstimatorDomain(TdiError):
    """Mean outcome outside the estimator's arccos domain"""
    status_code = 422
    message = "Mean outcome outside the estimator domain"


class NonpositiveFisher(TdiError):
    status_code = 422
    message = "Fisher information must be positive"


class DegenerateKraus(TdiError):
    """Off-diagonal Kraus amplitude vanishes (sin(T*Omega) = 0)"""
    status_code = 422
    message = "Degenerate Kraus decomposition"


class CscSingularity(TdiError):
    status_code = 422
    message = "csc(omega*T') diverges"


class DomainEdge(TdiError):
    status_code = 422
    message = "Argument at the edge of the bound's domain"


class DimensionOverflow(TdiError):
    """Joint Hilbert space exceeds the configured dimension cap"""
    status_code = 413
    message = "Hilbert space dimension exceeds the configured cap"


class IoError(TdiError):
    """Result files could not be written"""
    status_code = 500
    message = "Failed to write results"


@errors.app_errorhandler(TdiError)
def handle_tdi_error(error):
    """Handle domain errors raised while serving a request"""
    current_app.logger.error(f"{error.__class__.__name__}: {error.message}")
    return jsonify({
        'error': error.__class__.__name__,
        'message': error.message
    }), error.status_code


@errors.app_errorhandler(400)
def bad_request_error(error):
    """Handle 400 Bad Request errors"""
    current_app.logger.warning(f"Bad request: {error}")
    return jsonify({
        'error': 'Bad Request',
        'message': 'The request could not be understood by the server.'
    }), 400


@errors.app_errorhandler(404)
def not_found_error(error):
    """Handle 404 Not Found errors"""
    return jsonify({
        'error': 'Not Found',
        'message': 'The requested resource could not be found.'
    }), 404


@errors.app_errorhandler(405)
def method_not_allowed_error(error):
    return jsonify({
        'error': 'Method Not Allowed',
        'message': 'The method is not allowed for the requested URL.'
    }), 405


@errors.app_errorhandler(500)
def internal_error(error):
    """Handle 500 Internal Server errors"""
    current_app.logger.error(f"Internal server error: {error}")
    current_app.logger.error(f"Traceback: {traceback.format_exc()}")
    return jsonify({
        'error': 'Internal Server Error',
        'message': 'An internal server error occurred.'
    }), 500
