"""
JSON endpoints: health check, strategy catalogue and analytic bound reports
"""
from flask import Blueprint, current_app, jsonify, request
import math

from tdisense.bounds import bound_report
from tdisense.errors import ValidationError
from tdisense.model import EnvironmentSpec, PhysicalParams
from tdisense.strategies import (build_ce_cnot, build_ce_multilevel, build_ce_swap,
                                 build_fe_cnot, build_fe_multilevel, build_fe_swap)
from tdisense.validators import validate_bounds_request

api = Blueprint('api', __name__)

CATALOGUE_PARAMS = PhysicalParams(1 / 300, 10.0, 80 * math.pi)


def _catalogue():
    p = CATALOGUE_PARAMS
    env = EnvironmentSpec.phonon_modes([p.g])
    return [
        build_fe_swap(p),
        build_ce_swap(p),
        build_fe_cnot(p),
        build_ce_cnot(p, [0.0] * 6),
        build_ce_multilevel(p, env),
        build_fe_multilevel(p, env),
    ]


@api.route('/health')
def health():
    return jsonify({'status': 'ok'})


@api.route('/strategies')
def strategies():
    """List strategy builders with their timed-operation counts"""
    return jsonify({'strategies': [
        {
            'name': s.name,
            'timed_op_count': s.timed_op_count,
            'subsystem_dims': list(s.subsystem_dims),
            'segments': [segment.label for segment in s.segments],
        }
        for s in _catalogue()
    ]})


@api.route('/bounds', methods=['POST'])
def bounds():
    """Bound report for the posted parameters at one or more epsilons"""
    data = request.get_json(silent=True)
    ok, message = validate_bounds_request(data)
    if not ok:
        raise ValidationError(message)

    p = PhysicalParams(float(data['omega']), float(data['g']), float(data['T']))
    shots = data.get('shots', 10000)
    epsilons = data.get('epsilons', [data.get('epsilon', 0.0)])
    reports = [bound_report(p, shots, float(e)).to_dict() for e in epsilons]

    current_app.logger.info(f"Bound report for {len(reports)} epsilon(s) at omega={p.omega}")
    return jsonify({'params': p.to_dict(), 'shots': shots, 'reports': reports})
