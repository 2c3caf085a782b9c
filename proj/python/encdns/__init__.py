"""Encrypted DNS measurement toolkit (DoH probing, resolver grouping, flow and trend analysis)."""

from ._core import (
    METHOD_LABELS,
    DegenerateInputError,
    Error,
    IoError,
    MockResolver,
    ParseError,
    ValidationError,
    adf_test,
    analyze_flows,
    catalog_summary,
    decode_message,
    default_max_lag,
    encode_query,
    extract_sld,
    format_percent,
    from_base64url,
    from_hex_dump,
    grouping_prefix,
    mackinnon_p,
    mean_std,
    partition_range,
    ratio_per_million,
    select_hostname,
    to_base64url,
    verify_endpoint,
)

__version__ = "0.3.0"
