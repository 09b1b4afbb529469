"""
WSGI config for prob_verifier project.
"""

import os
from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'prob_verifier.settings')

application = get_wsgi_application()
