"""
Pacote de comandos (subcomandos da linha de comando) do toolkit.
"""
