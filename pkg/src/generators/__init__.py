from .builtin_fields import create_builtin_field

__all__ = ['create_builtin_field']
