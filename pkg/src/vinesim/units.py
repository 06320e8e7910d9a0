"""Unit conversions for the I/O boundary.

All internal computation is SI (m, rad, Pa gauge, s).  Files, wire
messages and the CLI speak mm / kPa / deg / mm·s^-1, matching the bench
conventions, and convert here.
"""

import math

MM_PER_M = 1000.0
KPA_PER_PA = 1e-3

# 1 deg/mm expressed in rad/m
RAD_PER_M_PER_DEG_PER_MM = math.pi / 180.0 * 1000.0


def mm_to_m(x_mm: float) -> float:
    return x_mm / MM_PER_M


def m_to_mm(x_m: float) -> float:
    return x_m * MM_PER_M


def kpa_to_pa(p_kpa: float) -> float:
    return p_kpa * 1e3


def pa_to_kpa(p_pa: float) -> float:
    return p_pa * 1e-3


def deg_per_mm_to_rad_per_m(b: float) -> float:
    return b * RAD_PER_M_PER_DEG_PER_MM


def rad_per_m_to_deg_per_mm(b: float) -> float:
    return b / RAD_PER_M_PER_DEG_PER_MM


def deg_to_rad(a: float) -> float:
    return math.radians(a)


def rad_to_deg(a: float) -> float:
    return math.degrees(a)
