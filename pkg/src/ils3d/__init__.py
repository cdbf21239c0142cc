"""3D-ILS hyperchaotic map: dynamics analysis and a one-round colour image cipher."""
from .chaos import (
    C0,
    Guards,
    Orbit,
    SystemParams,
    SystemState,
    ccc_step,
    den,
    generate_orbit,
    ils_step,
    map_F,
    map_G,
    map_H,
    sat,
)
from .cipher import (
    KeyMaterial,
    bit_mix,
    bit_unmix,
    decrypt,
    derive_keys,
    encrypt,
    keys_from_hash,
    make_keystream,
)
from .dynamics import (
    LyapunovSpectrum,
    bifurcation_scan,
    finite_time_exponents,
    jacobian_analytic,
    jacobian_fd,
    lyapunov_qr,
    phase_samples,
    sensitivity_pair,
)
from .metrics import adjacent_correlation, differential_test, npcr, shannon_entropy, uaci

__version__ = "0.1.0"
