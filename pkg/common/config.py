from pathlib import Path

# Base directory of the project
BASE_DIR = Path(__file__).resolve().parent.parent

CONFIG = {
    'schema_version': 1,
    'output_env': 'KPPLAB_OUTPUT',       # Environment variable holding the default output root
    'default_output': BASE_DIR / "output",
    'hash_length': 12,                   # Characters of the config hash used in run directory names

    'files': {
        'log': 'kpplab.log',
        'config': 'config.yaml',
        'record': 'run_record.json',
        'summary': 'summary.txt',
        'validation': 'validation.json',
        'observations': 'observations.csv',
        'supersolution': 'supersolution.json',
        'snapshot_prefix': 'snapshot',
        'passage_table': 'passage_table.csv',
        'speed_ladder': 'speed_ladder.csv',
        'speeds': 'speeds.json',
        'front': 'front_positions.csv',
        'shape': 'wulff_shape.csv',
        'wulff': 'wulff.json',
        'strong_wulff': 'strong_wulff.csv',
        'sandwich': 'sandwich.json',
        'sandwich_csv': 'sandwich.csv',
        'sweep': 'sweep.json',
        'sweep_csv': 'sweep.csv',
    },

    'medium': {
        'table_cells': {1: 1024, 2: 256},  # Checkerboard cells per axis before the table wraps
        'mollify_radius': 0.1,
        'fourier_modes': 8,
        'fourier_max_frequency': 2,
        'kpp_tolerance': 1e-3,             # Allowed 1 - g(u)/u at the smallest u sample
        'periodicity_tolerance': 1e-12,
        'validation_samples': 10000,
    },

    'kernel': {
        'tail_tolerance': 1e-8,            # e^{-alpha R_tail} <= tail_tolerance
        'validation_samples': 2000,
        'operator_samples': 300,           # Samples checked when a nonlocal operator is built
    },

    'solver': {
        'cfl_safety': 0.9,
        'range_tolerance': 1e-12,          # Fields may leave [0, 1] by at most this much
        'monotonicity_tolerance': 1e-12,
        'boundary_tolerance': 1e-6,        # Boundary activity that counts as domain overflow
        'truncation_threshold': 1e-8,
        'modulation_samples': 16,          # Phases sampled when taking suprema over one period
    },

    'grid': {
        'h': {1: 0.1, 2: 0.25},           # Default cell width per dimension
        'margin': 20.0,                    # Extra radius beyond the predicted spread
    },

    'passage': {
        'horizon': 200,
        'window': 3,                       # Persistence window W in periods
        'margin': 20.0,                    # Extra domain radius around the source/target pair
        'growth': 1.5,                     # Domain growth factor after a boundary overflow
        'max_retries': 3,
        'recheck_fraction': 0.1,           # Share of entries re-checked with window 2W
        'max_workers': 4,
    },

    'speed': {
        'ladder': {1: [32, 64, 128], 2: [16, 32, 64]},
        'max_resolution': 0.1,             # Relative change of w from one period in the last passage times
        'front_time': 40.0,
        'front_margin': 20.0,
        'front_back': 10.0,
        'speed_floor': 1e-3,               # c in c <= w(e) <= 1/c when none is fitted
    },

    'wulff': {
        'directions': {1: 2, 2: 32},
        'probe_theta': 0.5,
        'probe_delta': 0.15,
        'probe_time': 30.0,
        'fine_directions': 2048,           # Direction grid for support-function sup norms
        'max_angular_gap': 0.7854,         # rad between neighbouring directions (8 equally spaced)
    },

    'experiments': {
        'cube_cap': 4096,
        'phi_tolerance': 1e-2,
        'thresholds': (0.1, 0.9),          # (eta0, eta1) for the mixed zone
        'band': 0.1,
        'rho_power': 0.5,                  # rho(eps) = eps ** rho_power
        'sweep_margin': 20.0,              # Unscaled margin beyond the predicted spread
        'hair_trigger_probes': 4,          # Probes per period
        'hair_trigger_horizon': 100.0,
        'hair_trigger_radius': 20.0,       # Half-width of the hair-trigger domain
        'vlin_delta': 0.2,
        'noise_floor': 0.1,                # Relative slack for sweep monotonicity
    },

    'performance': {
        'max_workers': None,               # None means one worker per physical core
    },
}
