"""
Django settings for prob_verifier project.
"""

from pathlib import Path
from decouple import config

# Build paths inside the project
BASE_DIR = Path(__file__).resolve().parent.parent

# Security settings
SECRET_KEY = config('SECRET_KEY', default='django-insecure-change-this-in-production')
DEBUG = config('DEBUG', default=True, cast=bool)
ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost,127.0.0.1').split(',')

# Application definition
INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    # Third-party apps
    'rest_framework',

    # Local apps
    'verifier',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'prob_verifier.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'prob_verifier.wsgi.application'

# Database
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

# Static files
STATIC_URL = 'static/'
STATIC_ROOT = BASE_DIR / 'staticfiles'

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# REST Framework settings
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'DEFAULT_PARSER_CLASSES': [
        'rest_framework.parsers.JSONParser',
    ],
    'DEFAULT_PAGINATION_CLASS': 'rest_framework.pagination.PageNumberPagination',
    'PAGE_SIZE': 10,
}

# API Access Control
VERIFIER_API_TOKEN = config('VERIFIER_API_TOKEN', default='')  # Optional static token for simple auth

# Engine Settings
VERIFIER_ENGINE = config('VERIFIER_ENGINE', default='general')
VERIFIER_TIMEOUT = config('VERIFIER_TIMEOUT', default=500, cast=float)
VERIFIER_MAX_ITERATIONS = config('VERIFIER_MAX_ITERATIONS', default=200, cast=int)
VERIFIER_MAX_TRACES = config('VERIFIER_MAX_TRACES', default=5000, cast=int)
VERIFIER_VALUE_ANALYSIS = config('VERIFIER_VALUE_ANALYSIS', default=0, cast=int)
VERIFIER_KEEP_PARTIAL_VALUE_ANALYSIS = config('VERIFIER_KEEP_PARTIAL_VALUE_ANALYSIS', default=False, cast=bool)
VERIFIER_INTERPOLATION = config('VERIFIER_INTERPOLATION', default='auto')
VERIFIER_RUNTIME_CHECKS = config('VERIFIER_RUNTIME_CHECKS', default=DEBUG, cast=bool)
VERIFIER_MAXSMT_BATCH = config('VERIFIER_MAXSMT_BATCH', default=8, cast=int)
VERIFIER_LOG_LEVEL = config('VERIFIER_LOG_LEVEL', default='INFO')

# SMT Solver Settings
SMT_BACKEND = config('SMT_BACKEND', default='auto')
SMT_SOLVER_PATH = config('SMT_SOLVER_PATH', default='z3')
SMT_SOLVER_ARGS = config('SMT_SOLVER_ARGS', default='-in -smt2')
SMT_SOLVER_INTERPOLATION = config('SMT_SOLVER_INTERPOLATION', default=False, cast=bool)
SMT_QUERY_TIMEOUT_MS = config('SMT_QUERY_TIMEOUT_MS', default=10000, cast=int)
SMT_CACHE_TIMEOUT = config('SMT_CACHE_TIMEOUT', default=3600, cast=int)

# Cache Configuration (solver answers)
CACHES = {
    'default': {
        'BACKEND': 'django.core.cache.backends.locmem.LocMemCache',
        'LOCATION': 'prob-verifier',
    }
}

# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'verifier': {
            'handlers': ['console'],
            'level': VERIFIER_LOG_LEVEL,
            'propagate': False,
        },
    },
}
