"""Writes data/nasdaq10_synthetic.csv: 502 daily closes for ten tickers.

Log-returns follow a one-factor multivariate t law (4 degrees of freedom,
pairwise correlation 0.5) with daily volatilities between 1.3% and 2.5%,
so the largest covariance eigenvalue lands near 2e-3.
"""

import argparse
import pathlib

import numpy as np
import pandas as pd

TICKERS = ["AMZN", "FB", "GOOGL", "AAPL", "MSFT", "INTC", "CSCO", "NFLX", "CMCSA", "ADBE"]
VOLS = np.array([0.019, 0.021, 0.017, 0.016, 0.015, 0.018, 0.013, 0.025, 0.014, 0.019])
START = [980.0, 135.0, 810.0, 29.0, 62.0, 36.0, 31.0, 130.0, 35.0, 110.0]
DRIFT = 4e-4
RHO = 0.5
DF = 4.0
DAYS = 502


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=20170103)
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "nasdaq10_synthetic.csv"))
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    T = DAYS - 1
    d = len(TICKERS)
    z = np.sqrt(RHO) * rng.standard_normal((T, 1)) + np.sqrt(1.0 - RHO) * rng.standard_normal((T, d))
    # Unit-variance t: scale by sqrt((df - 2) / W) with W ~ chi2(df).
    w = rng.chisquare(DF, size=(T, 1))
    returns = DRIFT + VOLS * z * np.sqrt((DF - 2.0) / w)

    log_prices = np.vstack([np.zeros(d), np.cumsum(returns, axis=0)]) + np.log(START)
    dates = pd.bdate_range("2017-01-03", periods=DAYS)
    frame = pd.DataFrame(np.round(np.exp(log_prices), 6), columns=TICKERS)
    frame.insert(0, "date", dates.strftime("%Y-%m-%d"))
    frame.to_csv(args.out, index=False, float_format="%.6f")

    realized = np.diff(np.log(frame[TICKERS].to_numpy()), axis=0)
    lam = np.linalg.eigvalsh(np.cov(realized, rowvar=False)).max()
    print(f"wrote {args.out}: T={T} returns, lambda_max={lam:.4g}")


if __name__ == "__main__":
    main()
