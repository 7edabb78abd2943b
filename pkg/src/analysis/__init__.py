"""
Núcleo numérico: base espectral, sensores, teste estratégico, observadores e normas regionais.
"""
