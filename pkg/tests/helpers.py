"""Instance builders shared by the tests."""
import math

from aeromesh.core_types import PolarPos, Role, Session, UavState


def at(r, deg, alt=60.0):
    return PolarPos(r, math.radians(deg), alt)


def instance(specs, gs_radios=3, app_radios=3):
    """Sessions, app UAVs and a GS at the origin from (r m, bearing deg, demand Mbps) triples."""
    apps = {f"A{k}": UavState(f"A{k}", Role.APPLICATION, at(r, d), 0.0, app_radios)
            for k, (r, d, _) in enumerate(specs)}
    sessions = [Session(f"s{k}", f"A{k}", t, "GS") for k, (_, _, t) in enumerate(specs)]
    gs = UavState("GS", Role.GROUND_STATION, PolarPos(0.0, 0.0), 0.0, gs_radios)
    return sessions, apps, gs
