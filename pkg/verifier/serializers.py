"""
Serializers for API endpoints
"""
from rest_framework import serializers

from .exceptions import ParseError, TaskError
from .models import VerificationRun
from .utils.driver import ENGINES
from .utils.surface import parse_task


class TaskSubmissionSerializer(serializers.Serializer):
    """
    Serializer for a task submitted for verification
    """
    source = serializers.CharField(trim_whitespace=False)
    name = serializers.CharField(required=False, default='', allow_blank=True, max_length=255)
    beta = serializers.CharField(required=False, allow_null=True, default=None)
    engine = serializers.ChoiceField(choices=ENGINES, required=False, default=None, allow_null=True)
    timeout = serializers.FloatField(required=False, default=None, allow_null=True, min_value=0.1)
    value_analysis = serializers.IntegerField(required=False, default=None, allow_null=True, min_value=0)

    def validate(self, attrs):
        """
        Parse the task so syntax errors surface as validation errors
        """
        try:
            attrs['task'] = parse_task(attrs['source'], beta=attrs.get('beta'), name=attrs.get('name', ''))
        except ParseError as e:
            raise serializers.ValidationError({'source': [f"line {e.line}, column {e.column}: {e.message}"]})
        except TaskError as e:
            raise serializers.ValidationError({'source': [str(e)]})
        return attrs


class CounterexampleSerializer(serializers.Serializer):
    """
    Serializer for a counterexample summary
    """
    traces = serializers.ListField(child=serializers.CharField())
    weights = serializers.ListField(child=serializers.RegexField(r'^\d+/\d+$'))
    traceCount = serializers.IntegerField(min_value=1)
    totalWeight = serializers.RegexField(r'^\d+/\d+$')
    jointPathCondition = serializers.CharField()
    witness = serializers.DictField(child=serializers.IntegerField())


class RunReportSerializer(serializers.Serializer):
    """
    The stable JSON report schema shared by the verify command and the API
    """
    task = serializers.CharField(allow_blank=True)
    name = serializers.CharField(allow_blank=True)
    engine = serializers.ChoiceField(choices=ENGINES)
    beta = serializers.RegexField(r'^\d+/\d+$')
    verdict = serializers.ChoiceField(choices=['safe', 'violation', 'unknown'])
    result = serializers.ChoiceField(choices=['SAT', 'UnSAT', 'Unknown', 'TO'])
    bound = serializers.RegexField(r'^\d+/\d+$', allow_null=True)
    time = serializers.FloatField(min_value=0)
    iterations = serializers.IntegerField(min_value=0)
    reason = serializers.CharField(allow_blank=True)
    totalWeight = serializers.RegexField(r'^\d+/\d+$', allow_null=True)
    counterexample = CounterexampleSerializer(allow_null=True)
    stats = serializers.DictField()


class VerificationRunSerializer(serializers.ModelSerializer):
    """
    Serializer for VerificationRun model
    """
    class Meta:
        model = VerificationRun
        fields = [
            'id', 'name', 'task_path', 'engine', 'beta', 'verdict', 'bound',
            'reason', 'wall_time', 'iterations', 'trace_count', 'total_weight',
            'report', 'created_at'
        ]
        read_only_fields = fields
