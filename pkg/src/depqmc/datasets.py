"""Price tables: CSV ingestion, train/test splitting, synthetic fixtures.

The on-disk format is a plain CSV with header ``date,<ticker>,...``, one
ISO-8601 date per row, strictly increasing, and strictly positive prices in
every cell.  Validation failures name the offending row and column.

Synthetic generators replace proprietary market data: dependent geometric
Brownian motion prices (t-copula innovations) for the pricing study and
ARMA-GARCH log-returns (Clayton innovations) integrated into price levels
for the forecasting study.
"""

import csv
import datetime
from dataclasses import dataclass

import numpy as np

from . import copulas, garch, gbm, qmc, stats
from .errors import DomainError, ParseError


@dataclass(frozen=True)
class PriceTable:
    """Aligned daily price observations: dates, tickers, (n+1) x d prices."""

    dates: tuple
    tickers: tuple
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        P = np.asarray(self.prices, dtype=float)
        if P.ndim != 2 or P.shape != (len(self.dates), len(self.tickers)):
            raise DomainError("prices must be an (n_dates, n_tickers) matrix")
        if np.any(P <= 0.0):
            raise DomainError("prices must be strictly positive")
        object.__setattr__(self, "prices", P)

    @property
    def n_returns(self):
        return len(self.dates) - 1

    @property
    def dim(self):
        return len(self.tickers)

    def log_returns(self):
        return np.log(self.prices[1:] / self.prices[:-1])


def _parse_date(token, row):
    try:
        return datetime.date.fromisoformat(token)
    except ValueError:
        raise ParseError(f"row {row}: invalid ISO-8601 date {token!r}") from None


def ingest_csv(path):
    """Read and validate a price CSV; errors carry the row/column location."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if not header or header[0].strip().lower() != "date" or len(header) < 2:
            raise ParseError(f"{path}: header must read 'date,<ticker>,...'")
        tickers = [h.strip() for h in header[1:]]
        dates = []
        rows = []
        prev = None
        for i, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(
                    f"row {i}: expected {len(header)} cells, got {len(rec)}"
                )
            day = _parse_date(rec[0].strip(), i)
            if prev is not None and day <= prev:
                raise ParseError(
                    f"row {i}: date {day} is not strictly after {prev} "
                    "(duplicate or unsorted)"
                )
            prev = day
            vals = []
            for j, cell in enumerate(rec[1:], start=1):
                cell = cell.strip()
                if not cell:
                    raise ParseError(
                        f"row {i}, column {tickers[j - 1]!r}: missing value"
                    )
                try:
                    x = float(cell)
                except ValueError:
                    raise ParseError(
                        f"row {i}, column {tickers[j - 1]!r}: "
                        f"malformed number {cell!r}"
                    ) from None
                if not np.isfinite(x) or x <= 0.0:
                    raise ParseError(
                        f"row {i}, column {tickers[j - 1]!r}: "
                        f"nonpositive or non-finite price {cell!r}"
                    )
                vals.append(x)
            dates.append(day.isoformat())
            rows.append(vals)
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least two data rows")
    return PriceTable(dates=tuple(dates), tickers=tuple(tickers),
                      prices=np.asarray(rows, dtype=float))


def write_csv(table, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["date", *table.tickers])
        for day, row in zip(table.dates, table.prices):
            w.writerow([day, *[repr(float(x)) for x in row]])


def split(table, train_end=None, train_size=None):
    """Split into (train, test) tables sharing the boundary row.

    `train_end` is the last date (ISO string) allowed into the training set;
    alternatively `train_size` gives the number of training *returns*.  The
    boundary row is the last training observation and also the first test
    observation, so both sides see a full set of returns.
    """
    if (train_end is None) == (train_size is None):
        raise DomainError("specify exactly one of train_end / train_size")
    if train_end is not None:
        boundary = datetime.date.fromisoformat(str(train_end))
        n_trn = sum(
            1 for s in table.dates
            if datetime.date.fromisoformat(s) <= boundary
        ) - 1
    else:
        n_trn = int(train_size)
    if n_trn < 1 or n_trn >= len(table.dates) - 1:
        raise DomainError(
            f"boundary leaves {n_trn} training returns out of "
            f"{table.n_returns}; need both sides nonempty"
        )
    train = PriceTable(table.dates[: n_trn + 1], table.tickers,
                       table.prices[: n_trn + 1])
    test = PriceTable(table.dates[n_trn:], table.tickers,
                      table.prices[n_trn:])
    return train, test


def _dates_from(start, n):
    day0 = datetime.date.fromisoformat(start)
    return tuple((day0 + datetime.timedelta(days=k)).isoformat()
                 for k in range(n))


def _tickers(d, prefix="A"):
    return tuple(f"{prefix}{j + 1}" for j in range(d))


def synthetic_gbm_table(n=1250, d=3, rate=0.0005, sigma=None, rho=0.5,
                        nu=4.0, x0=100.0, seed=0, start="2001-01-01"):
    """Prices from dependent GBMs whose innovations follow a t copula."""
    sig = np.full(d, 0.2 / np.sqrt(250.0)) if sigma is None else np.asarray(sigma, float)
    P = np.full((d, d), rho)
    np.fill_diagonal(P, 1.0)
    spec = copulas.StudentTCopula(P, nu)
    U = qmc.pseudo_uniforms(n, d + 1, seed=seed).points
    V = copulas.sample(spec, U)
    Z = stats.normal_quantile(V)
    model = gbm.GbmModel(rate=rate, sigma=sig, x0=np.full(d, float(x0)))
    paths = gbm.simulate(model, Z[None, :, :])
    prices = np.vstack([model.x0[None, :], paths[0]])
    return PriceTable(_dates_from(start, n + 1), _tickers(d), prices)


def synthetic_garch_table(n=1250, d=3, theta=2.0, mu=None, phi=0.3,
                          gamma=-0.1, omega=None, alpha=0.08, beta=0.88,
                          nu=6.0, seed=0, start="2001-01-01", level=100.0,
                          scale=0.01, burn=250):
    """Prices whose log-returns follow ARMA-GARCH margins with Clayton innovations.

    `scale` sets the typical daily log-return magnitude; omega defaults to a
    variance-targeted value for that scale.
    """
    mu_j = 0.0 if mu is None else mu
    omega_j = scale**2 * (1.0 - alpha - beta) if omega is None else omega
    model = garch.ArmaGarchModel(
        mu=np.full(d, mu_j), phi=np.full(d, phi), gamma=np.full(d, gamma),
        omega=np.full(d, omega_j), alpha=np.full(d, alpha),
        beta=np.full(d, beta), nu=np.full(d, nu),
        state0=garch.GarchState(
            x=np.full(d, mu_j), mu=np.full(d, mu_j),
            sigma2=np.full(d, omega_j / (1.0 - alpha - beta)),
        ),
        state=garch.GarchState(
            x=np.full(d, mu_j), mu=np.full(d, mu_j),
            sigma2=np.full(d, omega_j / (1.0 - alpha - beta)),
        ),
    )
    spec = copulas.Clayton(theta)
    U = copulas.sample(spec, qmc.pseudo_uniforms(n + burn, d, seed=seed).points)
    R = garch.simulate(model, U)[burn:]
    prices = level * np.exp(np.vstack([np.zeros(d), np.cumsum(R, axis=0)]))
    return PriceTable(_dates_from(start, n + 1), _tickers(d), prices)


def synthetic_uniform_table(n=1250, d=3, seed=0, start="2001-01-01"):
    """iid U(0,1) values disguised as a price table (for smoke tests)."""
    U = qmc.pseudo_uniforms(n + 1, d, seed=seed).points
    return PriceTable(_dates_from(start, n + 1), _tickers(d), U)
