"""
ASGI config for prob_verifier project.
"""

import os
from django.core.asgi import get_asgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'prob_verifier.settings')

application = get_asgi_application()
