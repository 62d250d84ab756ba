"""
Django settings for the sis_server project.

The project hosts a single app, ``epidemic``, driven through management
commands (``manage.py run`` / ``manage.py suite``). There is no database and
no URL configuration.
"""
import os
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'sis-server-local-only')

DEBUG = os.environ.get('DJANGO_DEBUG', '0') == '1'

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'rest_framework',
    'epidemic',
]

DATABASES = {}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Solver runs
SIS_WORKERS = int(os.environ.get('SIS_WORKERS', '0')) or None  # None: use the scenario's value
SIS_OUTPUT_DIR = Path(os.environ.get('SIS_OUTPUT_DIR', BASE_DIR / 'runs'))
SIS_CSV_FLOAT_FORMAT = '%.17g'

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'epidemic': {
            'handlers': ['console'],
            'level': os.environ.get('SIS_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
