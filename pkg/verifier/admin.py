from django.contrib import admin
from .models import VerificationRun


@admin.register(VerificationRun)
class VerificationRunAdmin(admin.ModelAdmin):
    list_display = ['name', 'engine', 'beta', 'verdict', 'bound', 'wall_time', 'created_at']
    list_filter = ['verdict', 'engine', 'created_at']
    search_fields = ['name', 'task_path', 'reason']
    readonly_fields = ['created_at', 'report']
