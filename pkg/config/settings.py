from pathlib import Path
import environ
import os

BASE_DIR = Path(__file__).resolve().parent.parent

env = environ.Env()
environ.Env.read_env(os.path.join(BASE_DIR, '.env'))

# The project never serves HTTP; the key only satisfies Django's settings check.
SECRET_KEY = env('SECRET_KEY', default='owslr-development-key')

DEBUG = env.bool('DEBUG', default=False)

ALLOWED_HOSTS = env.list('ALLOWED_HOSTS', default=[])

INSTALLED_APPS = [
    'owslr',
]

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Super-resolution runtime settings
OWSLR_THREADS = env.int('OWSLR_THREADS', default=1)
OWSLR_PRESET = env('OWSLR_PRESET', default='desk')
OWSLR_DATA_DIR = Path(env('OWSLR_DATA_DIR', default=str(BASE_DIR / 'data')))
OWSLR_INFERENCE_CHUNK = env.int('OWSLR_INFERENCE_CHUNK', default=4096)
OWSLR_LOG_LEVEL = env('OWSLR_LOG_LEVEL', default='INFO')

# Logs go to stderr so the CSV written by management commands on stdout stays clean
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'owslr': {
            'handlers': ['console'],
            'level': OWSLR_LOG_LEVEL,
            'propagate': False,
        },
    },
}
