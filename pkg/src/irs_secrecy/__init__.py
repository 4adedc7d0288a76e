"""Secrecy-rate maximization for IRS-assisted, AN-aided MIMO wiretap channels."""

from .bcd_driver import SolverOptions, SolverReport, bcd_solve, initialize
from .channel import RngStream, Scenario, build_scenario, dbm_to_watts
from .errors import InvalidInputError, NumericalError, UnsupportedConfigurationError
from .model import (ChannelSet, PhaseProfile, SystemConfig, TransmitDesign, effective_channels,
                    secrecy_rate)
from .multicast import MulticastChannelSet, bcd_qcqp_ccp_solve, multicast_sr

__version__ = "0.1.0"
