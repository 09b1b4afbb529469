"""
API endpoint tests
"""
from django.test import TestCase, override_settings
from django.urls import reverse
from rest_framework import status
from rest_framework.test import APIClient

from verifier.models import VerificationRun

COIN_TASK = """
pre true;
prog { { x := 1 } <+> { x := 0 } }
post x = 0;
bound 0.75;
"""


class VerifyEndpointTestCase(TestCase):
    """
    Test POST /api/verify/
    """

    def setUp(self):
        self.client = APIClient()

    def test_safe_task(self):
        response = self.client.post('/api/verify/', {'source': COIN_TASK, 'name': 'coin'}, format='json')
        self.assertEqual(response.status_code, status.HTTP_201_CREATED)
        self.assertEqual(response.data['verdict'], 'safe')
        self.assertEqual(response.data['bound'], '1/2')
        self.assertEqual(response.data['beta'], '3/4')
        run = VerificationRun.objects.get(id=response.data['id'])
        self.assertEqual(run.name, 'coin')
        self.assertEqual(run.source, COIN_TASK)

    def test_beta_override_and_engine(self):
        response = self.client.post('/api/verify/', {
            'source': COIN_TASK,
            'beta': '1/4',
            'engine': 'rc',
        }, format='json')
        self.assertEqual(response.status_code, status.HTTP_201_CREATED)
        self.assertEqual(response.data['verdict'], 'violation')
        self.assertEqual(response.data['engine'], 'rc')
        self.assertEqual(response.data['totalWeight'], '1/2')
        self.assertEqual(response.data['counterexample']['traceCount'], 1)
        run = VerificationRun.objects.get(id=response.data['id'])
        self.assertEqual(run.trace_count, 1)

    def test_syntax_error(self):
        response = self.client.post('/api/verify/', {'source': 'pre true; prog { x := }'}, format='json')
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        self.assertIn('source', response.data)
        self.assertFalse(VerificationRun.objects.exists())

    def test_invalid_options(self):
        for body in ({'source': COIN_TASK, 'engine': 'magic'}, {'source': COIN_TASK, 'timeout': 0},
                     {'source': COIN_TASK, 'beta': '2'}):
            with self.subTest(body=body):
                response = self.client.post('/api/verify/', body, format='json')
                self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)

    @override_settings(VERIFIER_API_TOKEN='secret')
    def test_token_required(self):
        response = self.client.post('/api/verify/', {'source': COIN_TASK}, format='json')
        self.assertEqual(response.status_code, status.HTTP_401_UNAUTHORIZED)

        self.client.credentials(HTTP_AUTHORIZATION='Token secret')
        response = self.client.post('/api/verify/', {'source': COIN_TASK}, format='json')
        self.assertEqual(response.status_code, status.HTTP_201_CREATED)


class RunEndpointsTestCase(TestCase):
    """
    Test the recorded run listing and statistics
    """

    def setUp(self):
        self.client = APIClient()
        for verdict in ('safe', 'safe', 'violation'):
            VerificationRun.objects.create(name='t', engine='general', beta='1/2', verdict=verdict)

    def test_list_runs(self):
        response = self.client.get(reverse('run-list'))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['count'], 3)
        self.assertEqual(len(response.data['results']), 3)

    def test_run_detail(self):
        run = VerificationRun.objects.first()
        response = self.client.get(reverse('run-detail', args=[run.id]))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['verdict'], run.verdict)

    def test_stats(self):
        response = self.client.get('/api/stats/')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data, {'total_runs': 3, 'safe': 2, 'violation': 1, 'unknown': 0})
