"""Built-in input tables.

The real per-bin values behind the model are confidential, so these tables
are synthetic stand-ins shaped after the published figures:

* hourly: quiet nights, a lunch peak at 13-14h and an evening peak at 20-22h;
* daily (Monday first): flat working week, busy Friday/Saturday, low Sunday;
* quantity: heavy-tailed amounts with a spike in the 575-600 bin, where the
  default debit withdrawal limit sits;
* num_ops: broken power law over 1..100 monthly operations, shallow up to 20
  and steep beyond;
* num_ops_stores: power law over 20-unit store-size bins.

Override any of them with a distribution config file.
"""

import numpy as np

from .distmodel import AMOUNT_BINS, MAX_MONTHLY_OPS, STORE_BINS, DistributionSet, normalize

# Peaks are kept to one dominant hour each (13h, 21h) with lower shoulders;
# broad flat peaks wash out the 24 h structure of same-card gaps.
HOURLY_RAW = [
    0.60, 0.35, 0.25, 0.20, 0.20, 0.30, 0.80, 1.80,
    3.00, 3.50, 3.50, 3.50, 3.50, 15.0, 7.00, 2.50,
    3.00, 3.50, 3.50, 4.00, 7.00, 15.0, 6.00, 1.50,
]

DAILY_RAW = [14.6, 14.8, 15.0, 15.3, 16.2, 15.8, 8.3]

CASH_LIMIT_BIN = 23  # 575-600
OPS_BREAK = 20
OPS_HEAD_EXPONENT = 1.2
OPS_TAIL_EXPONENT = 3.0
STORE_EXPONENT = 1.2


def quantity_raw():
    i = np.arange(AMOUNT_BINS) + 0.5
    w = 1.0 / (1.0 + (i / 2.0) ** 2.1)
    w[CASH_LIMIT_BIN] += 0.03
    return w


def num_ops_raw(head=OPS_HEAD_EXPONENT, tail=OPS_TAIL_EXPONENT, brk=OPS_BREAK):
    e = np.arange(1, MAX_MONTHLY_OPS + 1, dtype=float)
    # continuous at the break
    return np.where(e <= brk, e ** -head, brk ** (tail - head) * e ** -tail)


def store_raw(exponent=STORE_EXPONENT):
    return (np.arange(STORE_BINS) + 1.0) ** -exponent


def default_distributions() -> DistributionSet:
    return DistributionSet(
        hourly=normalize(HOURLY_RAW, "hour"),
        daily=normalize(DAILY_RAW, "day"),
        quantity=normalize(quantity_raw(), "amount"),
        num_ops=normalize(num_ops_raw(), "num_ops"),
        num_ops_stores=normalize(store_raw(), "store_size"),
    )
