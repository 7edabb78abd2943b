"""
Toolkit de Observabilidade Regional para difusão 2-D com condições de Neumann
"""

__version__ = "1.0.0"
__license__ = "MIT"
