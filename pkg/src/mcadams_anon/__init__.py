"""McAdams-coefficient speech pseudonymisation."""
