"""Rate-Half cooperative mitigation against a cognitive jamming adversary."""
from .adversary import (DetectorVerdict, KldEstimate, calibrate_delta, dave_observe_fcb,
                        energy_detect, knn_kld, pd_bound, pfa_bound)
from .analysis import (RateEstimate, SweepResult, find_alpha_star, kld_report,
                       mc_detection_rate, mc_error_rate, mc_false_alarm_rate, sweep_alpha)
from .config import ProtocolConfig
from .decoders import (CrossoverMatrix, JointDecision, charlie_detect, crossover_matrix, jmap,
                       remove_dummy, rhjdd)
from .protocol import FrameBatch, energy_audit, generate_frames, generate_pre_attack
from .signal_core import (InvalidParameterError, NoSolutionError, RngStream,
                          draw_circular_gaussian, psk_point, snr_db_to_noise_power)

__version__ = "0.1.0"
