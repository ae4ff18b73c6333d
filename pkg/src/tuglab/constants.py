"""Shared numeric constants.

The 0.99 / 0.01 / 1.01 clock-concentration split factors appear in several
estimates (event-B window, the nu and theta constants, the k-step density
lower bound). They are defined once here; do not inline the literals.
"""

# Fraction of Bernoulli-clock mass kept on the concentrated side.
CLOCK_BAND_LOW = 0.99
# Complementary slack mass.
CLOCK_SLACK = 0.01
# Upper band edge for the clock concentration event.
CLOCK_BAND_HIGH = 1.01

# Hoeffding exponent denominator scale for the clock series bound: the
# per-step range constant 10^4 in exp(-alpha^2 j / (2 * 10^4)).
CLOCK_SERIES_SCALE = 10_000.0
