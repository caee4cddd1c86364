"""
Django settings for DDCSieve tests.

The numerical library needs no database; the app is installed so that the
management command and signals resolve.
"""

SECRET_KEY = "test-secret-key-for-ddcsieve-tests"

DEBUG = True

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "ddcsieve",
]

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": ":memory:",
    }
}

USE_TZ = True

DDCSIEVE = {
    "N_JOBS": 1,
}
