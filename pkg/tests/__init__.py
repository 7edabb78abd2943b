"""
Pacote de testes do toolkit de observabilidade regional.
"""
