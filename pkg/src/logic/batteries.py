from typing import List, Optional, Tuple

from config import Config
from src.logic.formula import TRUE, Atom, DistGt, DistLe, Exists, Formula, Not, conj, var
from src.logic.parser import load_formulas
from src.structures.structure import Signature

Battery = List[Tuple[str, Formula]]


def mark_statistics(mark: str) -> Battery:
    """Statistics that see how the marked set sits inside the structure"""
    x1, x2 = var(1), var(2)
    m1, m2 = Atom(mark, (x1,)), Atom(mark, (x2,))
    return [
        (mark, m1),
        (f"{mark}_pair_close", conj(m1, m2, DistLe(x1, x2, 1))),
        (f"{mark}_mixed_close", conj(m1, Not(m2), DistLe(x1, x2, 1))),
        (f"{mark}_near", Exists('y', 1, x1, Atom(mark, ('y',)))),
    ]


def standard_battery(signature: Signature, mark: Optional[str] = None) -> Battery:
    """Small default set of strongly local statistics over a signature"""
    x1, x2 = var(1), var(2)
    battery: Battery = [('one', TRUE)]
    for name, k in signature.arities.items():
        if name == mark or name in signature.marks:
            continue
        if k == 1:
            battery.append((name, Atom(name, (x1,))))
        elif k == 2:
            battery.append((name, Atom(name, (x1, x2))))
    battery.append(('close1', DistLe(x1, x2, 1)))
    battery.append(('close2', DistLe(x1, x2, 2)))
    battery.append(('reach2', Exists('y', 2, x1, DistGt(x1, 'y', 1))))
    if mark is not None:
        battery.extend(mark_statistics(mark))
    return battery


def configured_battery(signature: Signature, mark: Optional[str] = None,
                       path: Optional[str] = None) -> Battery:
    """The battery file when one is configured, else the standard battery"""
    path = Config.BATTERY_FILE if path is None else path
    if not path:
        return standard_battery(signature, mark)
    battery = load_formulas(path)
    if mark is not None:
        battery.extend(mark_statistics(mark))
    return battery


def load_battery(path: str) -> Battery:
    return load_formulas(path)
