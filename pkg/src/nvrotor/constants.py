"""Physical constants (SI) used throughout the package."""

from scipy.constants import physical_constants

hbar = physical_constants["reduced Planck constant"][0]      # J s
h_planck = physical_constants["Planck constant"][0]          # J s
k_B = physical_constants["Boltzmann constant"][0]            # J/K
epsilon_0 = physical_constants["vacuum electric permittivity"][0]  # F/m
c_light = physical_constants["speed of light in vacuum"][0]  # m/s
