# Modules du laboratoire Schwartzman
