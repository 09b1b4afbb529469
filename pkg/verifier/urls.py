"""
URL configuration for API endpoints
"""
from django.urls import path, include
from rest_framework.routers import DefaultRouter
from . import views

router = DefaultRouter()
router.register(r'runs', views.VerificationRunViewSet, basename='run')

urlpatterns = [
    path('', include(router.urls)),
    path('verify/', views.verify_task, name='verify'),
    path('stats/', views.run_stats, name='stats'),
]
