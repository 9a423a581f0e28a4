"""Regenerate src/rusle_rds/data/default_config.json.

Fingerprints are the 26 indicators of a 30-year synthetic series for each
regional climate in ``rusle_rds.synthetic``; validity ranges span 0.6x to
1.6x the fingerprint value of each equation input.

    python scripts/build_default_config.py
"""

import json
from pathlib import Path

import numpy as np

from rusle_rds.climatology import IndicatorRegistry, indicators_from_array
from rusle_rds.synthetic import REGIONAL_CLIMATES, regional_daily

OUT = Path(__file__).resolve().parents[1] / "src" / "rusle_rds" / "data" / "default_config.json"

MONTHS = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"]

INDICATORS = (
    [{"id": "annual_precip", "kind": "total", "description": "mean annual precipitation", "units": "mm"}]
    + [
        {"id": f"precip_{m}", "kind": "total", "params": {"months": [k + 1]},
         "description": f"mean {m} precipitation", "units": "mm"}
        for k, m in enumerate(MONTHS)
    ]
    + [
        {"id": "modified_fournier", "kind": "mfi", "description": "modified Fournier index", "units": "mm"},
        {"id": "pci", "kind": "pci", "description": "precipitation concentration index", "units": "%"},
        {"id": "rain_days_ge10", "kind": "count", "params": {"threshold": 10.0},
         "description": "mean annual number of days with >= 10 mm", "units": "days"},
        {"id": "rain_days_ge10_total", "kind": "total", "params": {"threshold": 10.0},
         "description": "mean annual precipitation on days with >= 10 mm", "units": "mm"},
        {"id": "rain_ge10_monthly", "kind": "total", "params": {"threshold": 10.0, "per": "month"},
         "description": "mean monthly precipitation on days with >= 10 mm", "units": "mm"},
        {"id": "max_daily_precip", "kind": "annual_max",
         "description": "mean annual maximum daily precipitation", "units": "mm"},
        {"id": "wet_days", "kind": "count", "params": {"threshold": 1.0},
         "description": "mean annual number of days with >= 1 mm", "units": "days"},
        {"id": "precip_djf", "kind": "total", "params": {"months": [12, 1, 2]},
         "description": "mean winter precipitation", "units": "mm"},
        {"id": "precip_mam", "kind": "total", "params": {"months": [3, 4, 5]},
         "description": "mean spring precipitation", "units": "mm"},
        {"id": "precip_jja", "kind": "total", "params": {"months": [6, 7, 8]},
         "description": "mean summer precipitation", "units": "mm"},
        {"id": "precip_son", "kind": "total", "params": {"months": [9, 10, 11]},
         "description": "mean autumn precipitation", "units": "mm"},
        {"id": "precip_may_oct", "kind": "total", "params": {"months": [5, 6, 7, 8, 9, 10]},
         "description": "mean May-October precipitation", "units": "mm"},
        {"id": "wet_day_intensity", "kind": "wet_day_intensity", "params": {"threshold": 1.0},
         "description": "mean precipitation per day with >= 1 mm", "units": "mm/day"},
    ]
)

# (id, region, source, intercept, terms, outer, note)
EQUATIONS = [
    ("belgium_annual", "Belgium", "Bollinne et al.", -50.0, [("annual_precip", 0.85, 1.0)], None,
     "linear fit on annual precipitation; coefficients are illustrative stand-ins"),
    ("belgium_fournier", "Belgium", "Bollinne et al.", 0.0, [("modified_fournier", 2.4, 1.3)], None,
     "power law on the modified Fournier index; coefficients are illustrative stand-ins"),
    ("sicily_fournier", "Sicily", "Ferro et al.", 0.0, [("modified_fournier", 0.612, 1.56)], None,
     "power law on the modified Fournier index"),
    ("sicily_maxdaily", "Sicily", "Ferro et al.", 0.0, [("max_daily_precip", 1.2, 1.5)], None,
     "power law on annual maximum daily rainfall; coefficients are illustrative stand-ins"),
    ("algarve_rain10", "Algarve", "de Santos Loureiro and de Azevedo Coutinho", 0.0,
     [("rain_days_ge10_total", 7.05, 1.0), ("rain_days_ge10", -88.92, 1.0)], None,
     "monthly regression on rain of days >= 10 mm and their count, summed over the year"),
    ("bavaria_annual", "Bavaria", "Rogler and Schwertmann", -17.7, [("annual_precip", 0.83, 1.0)], None,
     "annual-precipitation regression converted to SI units"),
    ("bavaria_summer", "Bavaria", "Rogler and Schwertmann", -14.8, [("precip_may_oct", 1.41, 1.0)], None,
     "summer-half precipitation regression converted to SI units"),
]

COVER_TABLE = {
    "111": 0.0, "112": 0.0, "121": 0.0, "122": 0.0, "123": 0.0, "124": 0.0, "131": 0.0, "132": 0.0,
    "133": 0.0, "141": 0.01, "142": 0.01,
    "211": 0.2, "212": 0.2, "213": 0.15, "221": 0.35, "222": 0.2, "223": 0.2, "231": 0.05,
    "241": 0.2, "242": 0.15, "243": 0.1, "244": 0.08,
    "311": 0.001, "312": 0.001, "313": 0.001, "321": 0.04, "322": 0.05, "323": 0.05, "324": 0.03,
    "331": 0.0, "332": 0.0, "333": 0.26, "334": 0.33, "335": 0.0,
    "411": 0.0, "412": 0.0, "421": 0.0, "422": 0.0, "423": 0.0,
    "511": 0.0, "512": 0.0, "521": 0.0, "522": 0.0, "523": 0.0,
}


def sig(x, n=6):
    return float(f"{x:.{n}g}")


def main():
    registry = IndicatorRegistry.from_config(INDICATORS)
    fps = {}
    for k, region in enumerate(sorted(REGIONAL_CLIMATES)):
        dates, x = regional_daily(region, n_years=30, seed=100 + k)
        vals = indicators_from_array(x, dates, registry)[:, 0]
        fps[region] = {i: sig(v) for i, v in zip(registry.ids, vals)}

    equations = []
    for eid, region, source, icpt, terms, outer, note in EQUATIONS:
        fp = fps[region]
        ranges = {t[0]: [sig(0.6 * fp[t[0]], 4), sig(1.6 * fp[t[0]], 4)] for t in terms}
        eq = {
            "id": eid,
            "region": region,
            "source": source,
            "note": note,
            "intercept": icpt,
            "terms": [{"indicator": i, "coef": c, "exponent": e} for i, c, e in terms],
            "fingerprint": fp,
            "input_ranges": ranges,
            "output_bounds": [0.0, 10000.0],
        }
        if outer:
            eq["outer"] = {"coef": outer[0], "exponent": outer[1]}
        r = icpt + sum(c * fp[i] ** e for i, c, e in terms)
        print(f"{eid:18s} R(home fingerprint) = {r:8.1f}")
        equations.append(eq)

    cfg = {
        "description": "Default configuration. Fingerprints come from synthetic regional climates; "
        "cover values are indicative class averages.",
        "indicators": INDICATORS,
        "equations": equations,
        "cover_table": COVER_TABLE,
        "rds": {"variant": "sum", "aggregation": "geometric_mean", "guard_margin": 0.25,
                "fingerprint_statistic": "mean"},
        "classification": {"breaks": [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0]},
        "factors": {"slope_length_m": None, "energy_equation": "rusle",
                    "resampling": {"dem": "bilinear", "sand": "bilinear", "silt": "bilinear",
                                   "clay": "bilinear", "stoniness": "bilinear", "landcover": "nearest"}},
        "render": {"similarity_ramp": "blue-red", "erosivity_ramp": "rain", "erosion_ramp": "erosion",
                   "erosion_log": True},
    }
    OUT.write_text(json.dumps(cfg, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
