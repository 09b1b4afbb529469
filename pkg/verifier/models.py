"""
Database models for recorded verification runs
"""
from django.db import models


class VerificationRun(models.Model):
    """
    One engine run over one task, stored as its run report
    """
    name = models.CharField(max_length=255)
    task_path = models.CharField(max_length=1024, blank=True)
    source = models.TextField(blank=True)

    ENGINE_CHOICES = [
        ('general', 'General'),
        ('rc', 'Refutationally complete'),
    ]
    engine = models.CharField(max_length=20, choices=ENGINE_CHOICES, default='general')
    beta = models.CharField(max_length=64)  # exact rational "num/den"

    VERDICT_CHOICES = [
        ('safe', 'Safe'),
        ('violation', 'Violation'),
        ('unknown', 'Unknown'),
    ]
    verdict = models.CharField(max_length=20, choices=VERDICT_CHOICES)
    bound = models.CharField(max_length=255, null=True, blank=True)
    reason = models.TextField(blank=True)

    # Metrics
    wall_time = models.FloatField(default=0)  # in seconds
    iterations = models.IntegerField(default=0)
    trace_count = models.IntegerField(null=True, blank=True)
    total_weight = models.CharField(max_length=255, null=True, blank=True)
    report = models.JSONField(default=dict)

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.name} ({self.engine}): {self.verdict}"

    @classmethod
    def record(cls, report: dict, source=''):
        """
        Store a run report given in its JSON form
        """
        cex = report.get('counterexample') or {}
        return cls.objects.create(
            name=report['name'],
            task_path=report['task'],
            source=source,
            engine=report['engine'],
            beta=report['beta'],
            verdict=report['verdict'],
            bound=report['bound'],
            reason=report['reason'],
            wall_time=report['time'],
            iterations=report['iterations'],
            trace_count=cex.get('traceCount'),
            total_weight=cex.get('totalWeight'),
            report=report,
        )
