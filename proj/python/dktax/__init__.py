"""Python access to the dktax tax engine, simulator and pipeline."""

from ._dktax import (
    Error,
    IncomeRecord,
    TaxSystem,
    __version__,
    bracket_location,
    deflate_system,
    dump_config,
    effective_mtr,
    elasticity,
    gamma_for_elasticity,
    generate_panel,
    joint_middle_transfer,
    load_tax_system,
    mechanical_ntr_change,
    normalized_difference,
    parse_tax_system,
    run,
    system_1986,
    system_1987,
    tax_liability,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
