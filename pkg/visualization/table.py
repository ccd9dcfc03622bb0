# -*- coding: utf-8 -*-
from config import AUDIT_COLORS, GROUP_COLORS, LEVEL_COLORS, STATE_COLORS, VERDICT_COLORS

_PALETTES = {
    "level": LEVEL_COLORS,
    "state": STATE_COLORS,
    "verdict": VERDICT_COLORS,
    "group": GROUP_COLORS,
}


def get_category_color(kind: str, name: str) -> str:
    """범주별 고정 색상 반환 (등록되지 않은 값은 중립 회색)"""
    return _PALETTES.get(kind, {}).get(str(name), AUDIT_COLORS['neutral'])


def color_map(kind: str, names) -> dict:
    return {name: get_category_color(kind, name) for name in names}
