from .scheme import DEFAULT_LENGTHS, IntervalScheme, LpaConfig
from .lcp import (
    AdaptiveRun,
    LcpResult,
    LcpStep,
    adaptive_fit,
    adaptive_series,
    lcp_statistic,
    local_window,
    min_t0,
    select_k,
    select_scenario,
    split_points,
)
from .calibration import (
    Calibration,
    CriticalValueTable,
    PathSet,
    RiskBound,
    calibrate,
    calibrate_critical_values,
    critical_values_from,
    false_alarm_rates,
    risk_bound_from,
    simulate_paths,
    simulate_risk_bound,
    validate_critical_values,
)
from .scenarios import LABELS, ScenarioSet, rolling_estimates, scenarios_from_returns
