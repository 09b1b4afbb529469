"""
API Views for the verifier
"""
import logging

from django.conf import settings
from django.db.models import Count
from rest_framework import status, viewsets
from rest_framework.decorators import api_view
from rest_framework.response import Response

from .exceptions import VerifierError
from .models import VerificationRun
from .serializers import RunReportSerializer, TaskSubmissionSerializer, VerificationRunSerializer
from .utils.driver import EngineConfig, verify
from .utils.reporting import RunReport

logger = logging.getLogger(__name__)


def _is_authorized(request):
    """
    Simple token-based access control. If VERIFIER_API_TOKEN is set in
    settings, require header Authorization: Token <VERIFIER_API_TOKEN>
    """
    token = getattr(settings, 'VERIFIER_API_TOKEN', '')
    if not token:
        return True  # token not configured, allow all
    auth_header = request.headers.get('Authorization') or ''
    if auth_header.startswith('Token '):
        provided = auth_header.replace('Token ', '', 1).strip()
        return provided == token
    return False


class VerificationRunViewSet(viewsets.ReadOnlyModelViewSet):
    """
    Recorded verification runs
    """
    queryset = VerificationRun.objects.all()
    serializer_class = VerificationRunSerializer


@api_view(['POST'])
def verify_task(request):
    """
    Verify a task and record the run
    POST /api/verify/

    Request body:
    {
        "source": "pre true; prog { ... } post x = 0; bound 0.5;",
        "beta": "1/2",  # optional, overrides the task's bound
        "engine": "general",  # optional
        "timeout": 60,  # optional
        "value_analysis": 0  # optional
    }
    """
    if not _is_authorized(request):
        return Response({'detail': 'Unauthorized'}, status=status.HTTP_401_UNAUTHORIZED)
    serializer = TaskSubmissionSerializer(data=request.data)

    if not serializer.is_valid():
        return Response(
            serializer.errors,
            status=status.HTTP_400_BAD_REQUEST
        )

    data = serializer.validated_data
    task = data['task']
    try:
        cfg = EngineConfig.from_settings(
            engine=data.get('engine'),
            timeout=data.get('timeout'),
            value_analysis=data.get('value_analysis'),
        )
        verdict = verify(task, cfg)
    except VerifierError as e:
        logger.error("verification of %s failed: %s", task.name or 'task', e)
        return Response(
            {'error': f'Verification failed: {str(e)}'},
            status=status.HTTP_500_INTERNAL_SERVER_ERROR
        )

    report = RunReport.from_verdict('', task.name, cfg.engine, task.beta, verdict)
    run = VerificationRun.record(report.as_dict(), source=data['source'])
    payload = RunReportSerializer(report.as_dict()).data
    payload['id'] = run.id
    return Response(payload, status=status.HTTP_201_CREATED)


@api_view(['GET'])
def run_stats(request):
    """
    Get verdict statistics
    GET /api/stats/
    """
    counts = dict(VerificationRun.objects.values_list('verdict').annotate(total=Count('id')))
    stats = {
        'total_runs': VerificationRun.objects.count(),
        'safe': counts.get('safe', 0),
        'violation': counts.get('violation', 0),
        'unknown': counts.get('unknown', 0),
    }
    return Response(stats)
